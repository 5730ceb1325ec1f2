"""Prompt templates for annotation, survey interviews, and biographies.

Templates are assembled section by section; ablation flags remove whole
sections without touching the others, which the tests rely on.
"""

from __future__ import annotations

ANNOTATION_HEAD = (
    "You are a professional annotator tasked with evaluating the attributes of a "
    "person based on their entire history of speeches. Your role is to assess the "
    "person holistically, taking into account all the provided speeches together, "
    "rather than evaluating each speech individually. Below is some historical "
    "speech information about this person:"
)

ANNOTATION_TEMPLATE = (
    ANNOTATION_HEAD
    + """

Text: {text}

Now, please classify the following attributes of the person:

1. Age Group
   a. Youth (18-35 years old)
   b. Middle-aged (36-65 years old)
   c. Elderly (over 65 years old)
2. Gender
   a. Male
   b. Female
3. Race
   a. White
   b. Black
   c. Asian
   d. Hispanic
4. Party Affiliation
   a. Democratic Party
   b. Republican Party
   c. Other Party
   d. Independent
5. Ideology
   a. Liberal
   b. Moderate
   c. Conservative

Please provide your answers in the following JSON format for each attribute:
```json
{{
"AGE": "A",
"GENDER": "B",
"RACE": "C",
"PARTY": "B",
"IDEOLOGY": "C"
}}
```"""
)


def time_framing(year: int) -> str:
    return (
        f"It's {year}, and you're being surveyed for the {year} "
        "American National Election Studies. "
    )


def persona_intro(state: str | None) -> str:
    living = f" living in {state}" if state else ""
    return (
        f"You are a real person{living} with the following personal information. "
        "Please answer the following question as best as you can. You should act "
        "consistently with the role you are playing. Do not select the option to "
        "refuse to answer.\n"
    )


HISTORY_SECTION = "Some of your historical comments on social media platforms: {comments}\n"

PERSONAL_SECTION = "Personal information: {info}\n"

CANDIDATE_SECTION = "Candidates Information: {context}\n"

QUESTION_SECTION = "Question: {question}\nOptions: {options}\n"

ANSWER_MARKER = "you only need to answer the option letter number"

ANSWER_DIRECT = (
    "You should give your answer (you only need to answer the option letter number) "
    'in JSON format as example below:\n```json\n{"answer": "xxx"}\n```'
)

ANSWER_REASON = (
    "You should give your answer and reason (you only need to answer the option "
    "letter number, plus a short reason) in JSON format as example below:\n"
    '```json\n{"answer": "xxx", "reason": "xxx"}\n```'
)

BIOGRAPHER_HEAD = "You are a very outstanding biographer."

BIOGRAPHY_TEMPLATE = (
    BIOGRAPHER_HEAD
    + " Now there is some information about a person. Please generate a description "
    "of his past experiences based on this information. Please return to this "
    "biography in the second person, with the sentence structure of "
    '"You are xxx".\n'
    "Personal information: {info}\n"
    "You should give your answer in JSON format as below:\n"
    '```json\n{{"answer": "xxx"}}\n```'
)

DEFAULT_2020_CANDIDATE_CONTEXT = (
    "In the 2020 United States presidential election, the Republican ticket is led "
    "by incumbent President Donald Trump, who is known for his assertive "
    "communication style and strict immigration policies. Trump is focusing on "
    "economic management and a tough stance on law and order, reflecting his "
    'commitment to his "America First" approach. His running mate is Vice President '
    "Mike Pence. On the Democratic side, former Vice President Joe Biden is the "
    "nominee, with Senator Kamala Harris from California as his running mate. "
    "Harris is the first African-American, first Asian-American, and third female "
    "vice presidential nominee on a major party ticket. Biden's campaign emphasizes "
    "unity and healing, with a focus on addressing the public health and economic "
    "impacts of the ongoing COVID-19 pandemic, civil unrest following the killing "
    "of George Floyd, the future of the Affordable Care Act, and the composition "
    "of the U.S. Supreme Court."
)
