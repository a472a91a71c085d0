//! Built-in prompt bodies. Each must byte-match its file under `prompts/v1/`.

use super::{Dataset, PromptTemplate, SchemaVariant, Stage, StrategyKind};

pub(super) static TEMPLATES: &[PromptTemplate] = &[
    PromptTemplate {
        id: "radqa.question_gen.direct_instruction",
        dataset: Dataset::Radqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::DirectInstruction),
        schema: None,
        path: "radqa/question_gen/direct_instruction.txt",
        inferred: false,
        body: r##"<radiology_report>
{{input_context}}
</radiology_report>

Considering the radiology report provided above, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination, formatted in an indexed list like "1. ... "."##,
    },
    PromptTemplate {
        id: "radqa.question_gen.question_prefix",
        dataset: Dataset::Radqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::QuestionPrefix),
        schema: None,
        path: "radqa/question_gen/question_prefix.txt",
        inferred: false,
        body: r##"<radiology_report>
{{input_context}}
</radiology_report>

Considering the radiology report provided above, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination. Please make sure each question starts with a different prefix, such as "is," "does," "has," "which," "what," "how," and "where", formatted in an indexed list like "1. ... "."##,
    },
    PromptTemplate {
        id: "radqa.question_gen.no_overlap",
        dataset: Dataset::Radqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::NoOverlap),
        schema: None,
        path: "radqa/question_gen/no_overlap.txt",
        inferred: false,
        body: r##"<radiology_report>
{{input_context}}
</radiology_report>

Considering the radiology report provided above, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination, formatted in an indexed list like "1. ... ". Make sure that the generated questions do not contain any words from the radiology report."##,
    },
    PromptTemplate {
        id: "radqa.question_gen.sum_direct_instruction",
        dataset: Dataset::Radqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::SumDirect),
        schema: None,
        path: "radqa/question_gen/sum_direct_instruction.txt",
        inferred: true,
        body: r##"<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination. Ensure the questions are diverse, covering various relevant aspects of the patient data. The generated questions should be formatted in an indexed list like "1. ... "."##,
    },
    PromptTemplate {
        id: "radqa.question_gen.sum_no_overlap",
        dataset: Dataset::Radqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::SumNoOverlap),
        schema: None,
        path: "radqa/question_gen/sum_no_overlap.txt",
        inferred: false,
        body: r##"<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination. Ensure the questions are diverse, covering various relevant aspects of the patient data. The generated questions should be formatted in an indexed list like "1. ... ". Make sure that the generated questions do not contain any words from the patient data."##,
    },
    PromptTemplate {
        id: "radqa.question_gen.sum_question_prefix",
        dataset: Dataset::Radqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::SumQuestionPrefix),
        schema: None,
        path: "radqa/question_gen/sum_question_prefix.txt",
        inferred: true,
        body: r##"<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination. Ensure the questions are diverse, covering various relevant aspects of the patient data. Please make sure questions start with different prefixes, such as "is," "does," "has," "which," "what," "how," and "where", formatted in an indexed list like "1. ... "."##,
    },
    PromptTemplate {
        id: "radqa.summarization.full",
        dataset: Dataset::Radqa,
        stage: Stage::Summarization,
        strategy: None,
        schema: Some(SchemaVariant::Full),
        path: "radqa/summarization/full.txt",
        inferred: false,
        body: r##"<radiology_report>
{{input_context}}
</radiology_report>

Output JSON Template:
{
  "symptoms": ["xx"],
  "medical_conditions": ["xx"],
  "areas_examined": ["xx"],
  "patient_medical_history": ["xx"],
  "diagnostic_techniques": ["xx"],
}

Please generate a summary for the radiology report above to cover 5 following aspects: "symptoms", "medical_conditions", "areas_examined", "patient_medical_history", and "diagnostic_techniques", following the JSON template. If there is no information found for an aspect, then just output an empty list [] as the value in the JSON output."##,
    },
    PromptTemplate {
        id: "radqa.summarization.incomplete",
        dataset: Dataset::Radqa,
        stage: Stage::Summarization,
        strategy: None,
        schema: Some(SchemaVariant::Incomplete),
        path: "radqa/summarization/incomplete.txt",
        inferred: true,
        body: r##"<radiology_report>
{{input_context}}
</radiology_report>

Output JSON Template:
{
  "symptoms": ["xx"],
  "medical_conditions": ["xx"],
  "patient_medical_history": ["xx"],
}

Please generate a summary for the radiology report above to cover 3 following aspects: "symptoms", "medical_conditions", and "patient_medical_history", following the JSON template. If there is no information found for an aspect, then just output an empty list [] as the value in the JSON output."##,
    },
    PromptTemplate {
        id: "radqa.summarization.none",
        dataset: Dataset::Radqa,
        stage: Stage::Summarization,
        strategy: None,
        schema: Some(SchemaVariant::None),
        path: "radqa/summarization/none.txt",
        inferred: true,
        body: r##"<radiology_report>
{{input_context}}
</radiology_report>

Please generate a simple one-paragraph summary for the radiology report above."##,
    },
    PromptTemplate {
        id: "radqa.answer_distill.extractive",
        dataset: Dataset::Radqa,
        stage: Stage::AnswerDistill,
        strategy: None,
        schema: None,
        path: "radqa/answer_distill/extractive.txt",
        inferred: false,
        body: r##"<radiology_report>
{{input_context}}
</radiology_report>

Please address the question below by referencing the specific details provided in the preceding report. Employ an extractive question-answering approach: provide only a quotation from the report as the answer, wrapped by quotation marks, and ensure these quotes are as concise as possible to accurately fulfill the query. Make every effort to find the answer in the report, considering all possible details. If, after thorough consideration, the question genuinely cannot be answered with the information provided, respond with "Unanswerable". Always aim to find a relevant and accurate answer. The output should be formatted as "Q: ... <newline>A: ... <newline><newline>Q: ...".

{{input_questions}}"##,
    },
    PromptTemplate {
        id: "mimicqa.question_gen.direct_instruction",
        dataset: Dataset::Mimicqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::DirectInstruction),
        schema: None,
        path: "mimicqa/question_gen/direct_instruction.txt",
        inferred: false,
        body: r##"<clinical_record>
{{input_context}}
</clinical_record>

Considering the clinical record provided above, generate {{question_num}} questions from a medical professional's viewpoint, formatted in an indexed list like "1. ... <newline>2. ..."."##,
    },
    PromptTemplate {
        id: "mimicqa.question_gen.question_prefix",
        dataset: Dataset::Mimicqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::QuestionPrefix),
        schema: None,
        path: "mimicqa/question_gen/question_prefix.txt",
        inferred: false,
        body: r##"<clinical_record>
{{input_context}}
</clinical_record>

Considering the clinical record provided above, generate {{question_num}} questions from a medical professional's viewpoint. Please make sure each question starts with a different prefix, such as "is," "does," "has," "which," "what," "how," and "where", formatted in an indexed list like "1. ... "."##,
    },
    PromptTemplate {
        id: "mimicqa.question_gen.no_overlap",
        dataset: Dataset::Mimicqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::NoOverlap),
        schema: None,
        path: "mimicqa/question_gen/no_overlap.txt",
        inferred: false,
        body: r##"<clinical_record>
{{input_context}}
</clinical_record>

Considering the clinical record provided above, generate {{question_num}} questions from a medical professional's viewpoint, formatted in an indexed list like "1. ... <newline>2. ...". Make sure that the generated questions do not contain any words from the clinical record."##,
    },
    PromptTemplate {
        id: "mimicqa.question_gen.sum_direct_instruction",
        dataset: Dataset::Mimicqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::SumDirect),
        schema: None,
        path: "mimicqa/question_gen/sum_direct_instruction.txt",
        inferred: true,
        body: r##"<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided above, generate {{question_num}} questions from a medical professional's viewpoint. Ensure the questions are diverse, covering various relevant aspects of the patient data. The generated questions should be formatted in an indexed list like "1. ... "."##,
    },
    PromptTemplate {
        id: "mimicqa.question_gen.sum_no_overlap",
        dataset: Dataset::Mimicqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::SumNoOverlap),
        schema: None,
        path: "mimicqa/question_gen/sum_no_overlap.txt",
        inferred: true,
        body: r##"<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided above, generate {{question_num}} questions from a medical professional's viewpoint. Ensure the questions are diverse, covering various relevant aspects of the patient data. The generated questions should be formatted in an indexed list like "1. ... ". Make sure that the generated questions do not contain any words from the patient data."##,
    },
    PromptTemplate {
        id: "mimicqa.question_gen.sum_question_prefix",
        dataset: Dataset::Mimicqa,
        stage: Stage::QuestionGen,
        strategy: Some(StrategyKind::SumQuestionPrefix),
        schema: None,
        path: "mimicqa/question_gen/sum_question_prefix.txt",
        inferred: false,
        body: r##"<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided above, generate {{question_num}} questions from a medical professional's viewpoint. Ensure the questions are diverse, covering various relevant aspects of the patient data. Please make sure questions start with different prefixes, such as "is," "does," "has," "which," "what," "how," and "where", formatted in an indexed list like "1. ... "."##,
    },
    PromptTemplate {
        id: "mimicqa.summarization.full",
        dataset: Dataset::Mimicqa,
        stage: Stage::Summarization,
        strategy: None,
        schema: Some(SchemaVariant::Full),
        path: "mimicqa/summarization/full.txt",
        inferred: false,
        body: r##"<clinical_record>
{{input_context}}
</clinical_record>

Output JSON Template:
{
    "patient_history": ["value1", "value2", ..., "value5"],
    "diagnosis": ["value1", "value2", ..., "value5"],
    "symptoms": ["value1", "value2", ..., "value5"],
    "medical_conditions": ["value1", "value2", ..., "value5"],
    "exam_results": ["value1", "value2", ..., "value5"],
}

Please generate a structured summary for the clinical record above to cover 5 following aspects: "patient_history", "diagnosis", "symptoms", "medical_conditions", and "exam_results", following the JSON template. Identify five values for each aspect at most. If there is no information found for an aspect, then just output an empty list [] as the value in the JSON output."##,
    },
    PromptTemplate {
        id: "mimicqa.summarization.none",
        dataset: Dataset::Mimicqa,
        stage: Stage::Summarization,
        strategy: None,
        schema: Some(SchemaVariant::None),
        path: "mimicqa/summarization/none.txt",
        inferred: true,
        body: r##"<clinical_record>
{{input_context}}
</clinical_record>

Please generate a simple one-paragraph summary for the clinical record above."##,
    },
    PromptTemplate {
        id: "mimicqa.answer_distill.extractive",
        dataset: Dataset::Mimicqa,
        stage: Stage::AnswerDistill,
        strategy: None,
        schema: None,
        path: "mimicqa/answer_distill/extractive.txt",
        inferred: false,
        body: r##"<clinical_record>
{{input_context}}
</clinical_record>

Please address the questions below by referencing the specific details provided in the preceding clinical record. Employ an extractive question-answering approach: provide only a quotation from the record as the answer, wrapped by quotation marks. The answer should always be taken from the clinical record and can range from a few words to one or two sentences. For questions beginning with phrases like "does the patient have," "is the patient," etc., ensure the answer is a direct quote from the record rather than a simple yes or no. If, after thorough consideration, the question genuinely cannot be answered with the information provided, respond with "Unanswerable". The output should be formatted as "Q: ... <newline>A: ... <newline><newline>Q: ...".

{{input_questions}}"##,
    },
];
