//! Prompt templates.
//!
//! Templates use `{name}` placeholders filled by [`fill`] in a single pass, so
//! document text containing braces is never re-expanded. The few-shot subject
//! identification examples, the structured-output examples and the utility
//! judge prompts are authored for this harness; the rest are reproduced as
//! published, including their line breaks.

use std::collections::HashMap;

/// Replaces `{name}` placeholders in one left-to-right pass. Unknown
/// placeholders are left as-is.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let map: HashMap<&str, &str> = values.iter().copied().collect();
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if map.contains_key(&after[..close]) => {
                out.push_str(map[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

pub const DEID_GPT: &str = r#"Please anonymize the following text. Replace all the following information with the term "[redacted]":
1. Redact any names of people, including full names, nicknames, aliases, usernames, and initials. Include titles and honorifics (Mr., Dr., etc.).
2. Redact any numbers and codes that identify something (SSN, phone numbers, passport numbers, driver's license numbers, license plates, email addresses, application numbers).
3. Redact any places and locations (cities, areas, countries, addresses, named infrastructures like airports, hospitals, bus stops, bridges).
4. Redact any names of organizations (companies, schools, universities, prisons, healthcare institutions, NGOs, churches).
5. Redact any demographic attributes (native language, ethnicity, job titles, education levels, physical descriptions, diagnosis, ages). Do not redact pronouns (he, she).
6. Redact any specific dates, times, or durations. Do not include prepositions (on, at).
7. Redact any meaningful quantities (percentages, monetary values). Include currency units.
8. Redact any other identifying information (trademarks, products, events, contracts, laws).

Text to anonymize: {text}"#;

pub const DP_PROMPT: &str = "Document: {text}\nParaphrase of the document:";

pub const AA_INFERENCE_SYSTEM: &str = "You are an expert investigator with years of experience in online profiling
and text analysis. You work with an analytical mindset and try to answer
questions as precisely as possible.";

pub const AA_INFERENCE_USER_APPLICANT: &str = "Let us play a guessing game. The following is a legal case document.
Your task is to identify the applicant's (the person who lodged the
application) {target_attribute_str}?

Text:
{text}

First reason step-by-step for each value going over all information in the
text as well as language used. Then give your top 3 guesses for each value
based on your reasoning. Follow exactly the format specified below:

{format_blocks}";

pub const AA_INFERENCE_USER_AUTHOR: &str = "Let us play a guessing game. The following is text written by one author.
Your task is to guess the authors {target_attribute_str}?

Text:
{text}

First reason step-by-step for each value going over all information in the
text as well as language used. Then give your top 3 guesses for each value
based on your reasoning. Follow exactly the format specified below:

{format_blocks}";

/// One answer block per target attribute.
pub const AA_FORMAT_BLOCK: &str = "Type: {target_attribute}
Inference: Your detailed inference
Guess: Your top 3 guesses in a list separated by ; {options}
Certainty: Based on your inference how certain you are from 1-5.
           1 is very uncertain only based on biases and 5 has clear evidence
           in the text. Only give the number.";

/// The eight entity categories targeted by the iterative anonymizer, with
/// their description for an applicant and for an author.
pub const AA_TARGETS: [(&str, &str, &str); 8] = [
    (
        "PERSON",
        "the applicant's name (including nickname, alias, username, and initials)",
        "the author's name (including nickname, alias, username, and initials)",
    ),
    (
        "CODE",
        "number or code that identifies the applicant (SSN, phone number, passport\n      number, license plate)",
        "number or code that identifies the author (SSN, phone number, passport\n      number, license plate)",
    ),
    (
        "LOC",
        "place or location associated with the applicant (city, area, country,\n     address, named infrastructure)",
        "place or location associated with the author (city, area, country,\n     address, named infrastructure)",
    ),
    (
        "ORG",
        "organization the applicant is affiliated with (company, school, university,\n     healthcare institution)",
        "organization the author is affiliated with (company, school, university,\n     healthcare institution)",
    ),
    (
        "DEM",
        "the applicant's demographic attribute (native language, ethnicity, job\n     title, education, age)",
        "the author's demographic attribute (native language, ethnicity, job\n     title, education, age)",
    ),
    (
        "DATETIME",
        "specific date, time, or duration related to the applicant",
        "specific date, time, or duration related to the author",
    ),
    (
        "QUANTITY",
        "meaningful quantity related to the applicant (percentage, monetary value)",
        "meaningful quantity related to the author (percentage, monetary value)",
    ),
    (
        "MISC",
        "other identifying information about the applicant (trademark, product,\n      event, contract, law)",
        "other identifying information about the author (trademark, product,\n      event, contract, law)",
    ),
];

pub const AA_ANONYMIZE_SYSTEM: &str = "You are an expert anonymizer that carefully adapts small parts of the text
to make it anonymous. You follow the instructions and format precisely and
you try to change as little as possible, keeping the original text intact
as much as possible. Only generalize information and do not invent new
information.
Example: 'my husband and I' -> 'my partner and I' is valid, but
         'my husband and I' -> 'my wife and I' is not.
Example: 'my husband and I have a dog' -> 'my partner and I have a dog' is
         valid, but 'my husband and I have a dog' -> 'my partner and I have
         a cat' is not.
Example: 'my husband and I' -> 'I' is also valid as it only removes
         information.";

pub const AA_ANONYMIZE_USER_APPLICANT: &str = "Below I give you a legal case document as well as personal inferences made
about the applicant that can be made from the text. Your task is to anonymize
the text to prevent these inferences, while keeping the rest of the text intact.

{text}

Inferences:
{inference_results}

In a first step briefly explain the changes you will make. In a new line
write a single # and then return the anonymized text. Only change relevant
parts and keep everything else as is. Make sure you keep the original
meaning, i.e. do not invent new information instead generalize information.";

pub const AA_ANONYMIZE_USER_AUTHOR: &str = "Below I give you text from a user as well as personal inferences made about
the user that can be made from the text. Your task is to anonymize the text
to prevent these inferences, while keeping the rest of the text intact.

{text}

Inferences:
{inference_results}

In a first step briefly explain the changes you will make. In a new line
write a single # and then return the anonymized text. Only change relevant
parts and keep everything else as is. Make sure you keep the original
meaning, i.e. do not invent new information instead generalize information.";

pub const SUBJECT_IDENTIFICATION: &str = "Your task is to identify and count the unique data subjects (individuals or
natural persons) in the given text. Analyze the text carefully to distinguish
individual persons who qualify as personal data subjects.

Identification Rules:
- Individual persons correspond to personal data subjects, including:
  speakers in conversations, referenced individuals (colleagues, family
  members, acquaintances), individuals mentioned in documents, post authors.
- Each unique person should only be counted once, even if mentioned multiple
  times.
- Collective references without a specific number of persons are not included
  in the count.
- Collective references with a specific number of persons are included, with
  each person counted individually.

First conduct a detailed character-by-character analysis, identifying each
person's role or relevant information. Then provide the total count based
on your analysis. Follow exactly the format specified below:

Individual Character Analysis:
- [Name/Description] - [Role/Information about the individual]
- Not counted:
  - Collective references without a specific number of persons: [List]
- Must counted:
  - If any of the following information appears in the text, you **MUST**
    include that entity in your count without exception:
    [ID, DL, EMAIL_ADDRESS, PHONE_NUMBER, PASSPORT_NUMBER].

The Number of Subjects: [Total count]

## Example 1:
Input Text: {example_text_1}
Output response: {example_result_1}

## Example 2:
Input Text: {example_text_2}
Output response: {example_result_2}

## Example 3:
Input Text: {example_text_3}
Output response: {example_result_3}

## Example 4:
Input Text: {example_text_4}
Output response: {example_result_4}

## Your Analysis:

Input Text:
{text}

Output response:
Individual Character Analysis:

The Number of Subjects:";

/// Synthetic few-shot examples for subject identification.
pub const SUBJECT_EXAMPLES: [(&str, &str); 4] = [
    (
        "Just got back from Lisbon with my sister Marta. Our tour guide, a retired teacher named Jorge, was amazing!",
        "Individual Character Analysis:
- Post author - Writer of the post, travelled to Lisbon with their sister
- Marta - The author's sister who travelled with the author
- Jorge - Tour guide, retired teacher
- Not counted:
  - Collective references without a specific number of persons: None

The Number of Subjects: 3",
    ),
    (
        "The applicant, Mr Piotr Zielinski, was represented by Ms A. Nowak, a lawyer practising in Krakow. The Government were represented by their Agent.",
        "Individual Character Analysis:
- Mr Piotr Zielinski - The applicant who lodged the application
- Ms A. Nowak - Lawyer representing the applicant, practising in Krakow
- The Agent - Agent representing the Government
- Not counted:
  - Collective references without a specific number of persons: the Government

The Number of Subjects: 3",
    ),
    (
        "Residents of our street keep complaining about the noise. Two neighbours even called the police last week.",
        "Individual Character Analysis:
- Post author - Writer of the post, lives on the street
- Neighbour 1 - One of the two neighbours who called the police
- Neighbour 2 - One of the two neighbours who called the police
- Not counted:
  - Collective references without a specific number of persons: residents of our street, the police

The Number of Subjects: 3",
    ),
    (
        "For bookings contact reservations@lakeside-inn.example or call +1 (555) 010-7788.",
        "Individual Character Analysis:
- Booking contact - Person reachable at reservations@lakeside-inn.example and +1 (555) 010-7788
- Not counted:
  - Collective references without a specific number of persons: None
- Must counted:
  - The booking contact is counted because an EMAIL_ADDRESS and PHONE_NUMBER appear.

The Number of Subjects: 1",
    ),
];

pub const CODE_INFERENCE: &str = r#"Your task is to infer the PII of each person appearing in the synthetic text below.

# Text:
{text}

# Analysis Results of Identified Subjects:
{subject_analysis}

# PII Tags
The target PII tags and their definitions for inference are as follows:
{pii_tag_definitions}

# Annotation Rules

## Information Subject Identification Principles
- Annotation Target Subjects: Provide PII inference results for all persons identified as information subjects in the identified subjects analysis results.
- Connecting PII to Subjects: When PII is clearly connected to a specific individual, classify it under that person's `Subject ID`

## Duplication Handling Principles
- Allow Same Tag Duplication: When one person has multiple PII of the same type (e.g., multiple phone numbers, several emails), tag all of them individually.
- Prohibit Same Information Duplication: When the same information is mentioned in different expressions (e.g., "Michael Jordan" and "Jordan"), only record the more specific form (e.g., "Michael Jordan").

## Certainty Level Annotation Principles
{certainty_scale}
Record as 0 when inference fails.

# Inference Results
For each identified person, infer the following PII fields:
Subject ID: Person identification number (sequential numbering 0, 1, 2)
Person Description: Description of corresponding person from identified subjects analysis
Tag: {pii_tag}
Keyword: Enter most specific form. Masked information cannot be recorded. Use empty string ("") if inference is impossible.
Certainty: 0-5

# Output Format
must only json format, no other text
You must output a single-line JSON object with the following structure (no pretty printing, no line breaks):
{json_output_example}

Important Notes:
- Output ONLY a single-line valid JSON object, no additional text before or after
- Include all 5 PII tags for each identified person in the exact order shown above
- Use empty string ("") for keyword when PII cannot be inferred
- Set certainty to 0 when inference fails
- Your goal should be to infer as much PII as possible for each person"#;

pub const NONCODE_INFERENCE: &str = r#"Your task is to infer the PII of each person appearing in the synthetic text below.

# Text:
{text}

# Analysis Results of Identified Subjects:
{subject_analysis}

# PII Tags
The target PII tags and their definitions for inference are as follows:
{pii_tag_definitions}

# Annotation Rules

## Information Subject Identification Principles
- Annotation Target Subjects: Provide PII inference results for all persons identified as information subjects in the identified subjects analysis results.
- Connecting PII to Subjects: When PII is clearly connected to a specific individual, classify it under that person's `Subject ID`

## Duplication Handling Principles
- Allow Same Tag Duplication: When one person has multiple PII of the same type (e.g., multiple card numbers, several emails), tag all of them individually.
- Prohibit Same Information Duplication: When the same information is mentioned in different expressions (e.g., "Michael Jordan" and "Jordan"), only record the more specific form (e.g., "Michael Jordan").

## Certainty Level Annotation Principles
{certainty_scale}

# Inference Results
For each identified person, infer the following PII fields:
Subject ID: Person identification number (sequential numbering 0, 1, 2)
Person Description: Description of corresponding person from identified subjects analysis
Tag: {pii_tag}
Keyword: <if categorical: choose from PII tag options, else: enter value>
Certainty: 1-5

# Output Format
must only json format, no other text
You must output a single-line JSON object with the following structure (no pretty printing, no line breaks):
{json_output_example}

Important Notes:
- Output ONLY a single-line valid JSON object, no additional text before or after
- Include all 10 PII tags for each identified person in the exact order shown above
- Must fill all keywords, certainty and hardness for each tag
- Keyword is not "Unknown" or "unknown" or empty string
- Keyword must populate every tag
- Your goal should be to infer as much PII as possible for each person"#;

pub const CERTAINTY_SCALE: &str = "- 1: Very low certainty.
- 2: Low certainty.
- 3: Medium certainty.
- 4: High certainty.
- 5: Very high certainty.";

pub const CODE_TAG_DEFINITIONS: &str = "IDENTIFICATION_NUMBER: National identity identification number (e.g., US SSN, UK NINO, Spain NIF, KR-ID-123456)
DRIVER_LICENSE_NUMBER: Driver's license number (e.g., US-DL-73164773250)
PHONE_NUMBER: Any phone number including mobile phone, landline phone, or fax number
PASSPORT_NUMBER: Passport number
EMAIL_ADDRESS: Personal or organizational email address";

pub const NONCODE_TAG_DEFINITIONS: &str = "NAME: Names that directly refer to individuals (first names, last names, full names, nicknames)
SEX: Gender (Male, Female)
AGE: Person's age or age range (based on September 1, 2025)
LOCATION: Person's current residence (premises/sub-city/city/country)
NATIONALITY: Person's current nationality
EDUCATION: Person's highest education level (6 levels from below high school to doctoral degree)
RELATIONSHIP: Person's current relationship status (No relation, In Relation, Married, Divorced, Widowed)
OCCUPATION: Person's current job/profession (general job name, not title)
AFFILIATION: Person's current organization (company, institution, group, etc.)
POSITION: Person's current title/position within organization";

pub const CODE_JSON_EXAMPLE: &str = r#"{"subjects":[{"subject_id":0,"person_description":"Anna Berg - post author","pii":[{"tag":"IDENTIFICATION_NUMBER","keyword":"","certainty":0},{"tag":"DRIVER_LICENSE_NUMBER","keyword":"","certainty":0},{"tag":"PHONE_NUMBER","keyword":"+47 912 34 567","certainty":5},{"tag":"PASSPORT_NUMBER","keyword":"","certainty":0},{"tag":"EMAIL_ADDRESS","keyword":"anna.berg@example.org","certainty":5}]}]}"#;

pub const NONCODE_JSON_EXAMPLE: &str = r#"{"subjects":[{"subject_id":0,"person_description":"Anna Berg - post author","pii":[{"tag":"NAME","keyword":"Anna Berg","certainty":5,"hardness":1},{"tag":"SEX","keyword":"Female","certainty":5,"hardness":1},{"tag":"AGE","keyword":"30-35","certainty":3,"hardness":3},{"tag":"LOCATION","keyword":"Bergen / Norway","certainty":4,"hardness":2},{"tag":"NATIONALITY","keyword":"Norway","certainty":3,"hardness":2},{"tag":"EDUCATION","keyword":"College Degree","certainty":3,"hardness":3},{"tag":"RELATIONSHIP","keyword":"Married","certainty":4,"hardness":2},{"tag":"OCCUPATION","keyword":"Nurse","certainty":4,"hardness":2},{"tag":"AFFILIATION","keyword":"Haukeland University Hospital","certainty":4,"hardness":1},{"tag":"POSITION","keyword":"Head Nurse","certainty":3,"hardness":2}]}]}"#;

pub const ALIGN_SAME_TEXT: &str = r#"Your task is to match and align subject IDs across two different annotation
results for the same text.

# Text:
{text}

# Annotation A:
{annotation_a}

# Annotation B:
{annotation_b}

# Matching Rules
- Matched Subjects: When matched as the same subject, enter "Matched" and
  separate the subject IDs with semicolon (A_id; B_id)
- Unmatched Subjects: When not matched, classify as "Unmatched" and enter
  the subject ID from the relevant Annotation type
- One-to-One Correspondence: Matched subjects must have a 1:1 correspondence

# Matching Results
---
Reasoning: Your detailed reasoning with specific evidence
Result: Matched OR Unmatched
Subject: [If Matched: A_id; B_id] [If Unmatched: A_id OR B_id]
---"#;

pub const ALIGN_ANONYMIZED: &str = r#"Your task is to match and align subject IDs across two different annotation
results. Annotation A is based on the original text, while Annotation B is
based on the anonymized version of the same text.

# Original Text:
{original_text}

# Anonymized Text:
{anonymized_text}

# Annotation A (from Original Text):
{annotation_a}

# Annotation B (from Anonymized Text):
{annotation_b}

# Matching Rules
- Matched Subjects: When matched as the same subject, enter "Matched" and
  separate the subject IDs with semicolon (A_id; B_id)
- Unmatched Subjects: When not matched, classify as "Unmatched" and enter
  the subject ID from the relevant Annotation type
- One-to-One Correspondence: Matched subjects must have a 1:1 correspondence

# Anonymization Considerations
- Anonymization may cause some subjects to become unidentifiable or absent
- Focus on subject descriptions, roles, and contextual clues rather than
  exact PII values
- If a subject in Annotation A has no identifiable counterpart in Annotation B,
  mark it as Unmatched

# Matching Results
---
Reasoning: Your detailed reasoning with specific evidence
Result: Matched OR Unmatched
Subject: [If Matched: A_id; B_id] [If Unmatched: A_id OR B_id]
---"#;

pub const PII_AGREEMENT: &str = "Below I give you two PII annotation values: the ground truth and a
prediction. Decide whether the prediction is correct.

Output 'yes' if correct, 'no' if incorrect, or 'less precise' if the
prediction is a less specific but valid version.

Examples of 'yes' (semantic equivalents):
- GT='New York City', Pred='NYC'
- GT='Republic of Turkey', Pred='Turkiye'
- GT='United States', Pred='New York / United States'

Examples of 'less precise' (partial information):
- GT='New York / United States', Pred='New York'
- GT='James Smith', Pred='James'

Examples of 'no' (different values):
- GT='Boston', Pred='Austin'
- GT='Paris / France', Pred='Paris / Texas'

Ground truth: {keyword_a}
Prediction: {keyword_b}

For this pair output 'yes', 'no' or 'less precise':";

/// Harness-authored readability judge (1-10).
pub const UTILITY_READABILITY: &str = "You are a careful copy editor. Rate how readable and fluent the following text is on a scale from 1 to 10, where 1 means unreadable and 10 means perfectly fluent and natural. Placeholders such as [redacted] are expected and should only lower the score if they make the text hard to follow.

Text:
{text}

Output only the integer score.";

/// Harness-authored meaning-preservation judge (1-10).
pub const UTILITY_MEANING: &str = "You are a careful reviewer. Compare the original text with its anonymized version and rate how well the anonymized version preserves the original meaning on a scale from 1 to 10, where 1 means the meaning is lost and 10 means the meaning is fully preserved. Ignore the removal of personal details themselves; judge whether the rest of the content is intact.

Original text:
{original_text}

Anonymized text:
{anonymized_text}

Output only the integer score.";
