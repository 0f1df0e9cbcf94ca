"""
Word pools for the synthetic corpora.

Nouns and verbs come in both inflections with regular English morphology (plural nouns and
third-person singular verbs add ``s``), so that every generated sentence has a minimal
counterpart.
"""

from dataclasses import dataclass
from typing import Optional

from unitfinder_cli.constants import FEMALE, MALE, PLURAL, SINGULAR

SUBJECT_NOUNS = (
    "doctor",
    "farmer",
    "teacher",
    "lawyer",
    "pilot",
    "singer",
    "painter",
    "writer",
    "baker",
    "dancer",
    "student",
    "officer",
    "banker",
    "driver",
    "player",
    "guard",
    "nurse",
    "author",
    "soldier",
    "engineer",
)

# Plural verb forms; the singular adds "s"
VERBS = (
    "admire",
    "like",
    "know",
    "help",
    "greet",
    "avoid",
    "praise",
    "remember",
    "thank",
    "visit",
    "hear",
    "love",
    "trust",
    "follow",
    "blame",
)

ADVERBS = (
    "often",
    "never",
    "always",
    "sometimes",
    "rarely",
    "really",
    "certainly",
    "probably",
    "clearly",
    "openly",
)

PREPOSITIONS = ("near", "behind", "beside", "across", "from")

PROPER_NOUNS = (
    "John",
    "Mary",
    "Paul",
    "Susan",
    "Peter",
    "Anna",
    "Mark",
    "Laura",
    "David",
    "Emma",
)

LOCATION_NOUNS = (
    "lake",
    "car",
    "house",
    "tree",
    "bridge",
    "river",
    "building",
    "garden",
    "station",
    "road",
)

PRONOUNS = {MALE: "he", FEMALE: "she"}

# "The [occupation] [verb] because [he/she] ..." with past-tense intransitive verbs
GENDER_TEMPLATES = (
    "the {occupation} laughed because {pronoun} was happy",
    "the {occupation} cried because {pronoun} was sad",
    "the {occupation} left because {pronoun} was tired",
    "the {occupation} smiled because {pronoun} was pleased",
    "the {occupation} stayed because {pronoun} was needed",
    "the {occupation} ran because {pronoun} was late",
    "the {occupation} waited because {pronoun} was early",
    "the {occupation} slept because {pronoun} was exhausted",
    "the {occupation} yelled because {pronoun} was angry",
    "the {occupation} shouted because {pronoun} was afraid",
    "the {occupation} stopped because {pronoun} was lost",
    "the {occupation} whispered because {pronoun} was nervous",
    "the {occupation} moved because {pronoun} was cold",
    "the {occupation} sighed because {pronoun} was bored",
    "the {occupation} paused because {pronoun} was confused",
    "the {occupation} arrived because {pronoun} was invited",
    "the {occupation} returned because {pronoun} was worried",
)

OCCUPATIONS = (
    "accountant",
    "actor",
    "administrator",
    "analyst",
    "architect",
    "artist",
    "assistant",
    "athlete",
    "attendant",
    "auditor",
    "author",
    "baker",
    "banker",
    "barber",
    "bartender",
    "biologist",
    "bookkeeper",
    "broker",
    "builder",
    "butcher",
    "captain",
    "carpenter",
    "cashier",
    "chef",
    "chemist",
    "clerk",
    "coach",
    "collector",
    "columnist",
    "comedian",
    "commander",
    "commissioner",
    "composer",
    "consultant",
    "cook",
    "counselor",
    "courier",
    "critic",
    "curator",
    "dancer",
    "dentist",
    "deputy",
    "designer",
    "detective",
    "developer",
    "dietitian",
    "diplomat",
    "director",
    "dispatcher",
    "doctor",
    "drummer",
    "economist",
    "editor",
    "educator",
    "electrician",
    "engineer",
    "entrepreneur",
    "examiner",
    "executive",
    "farmer",
    "filmmaker",
    "financier",
    "firefighter",
    "florist",
    "gardener",
    "geologist",
    "guard",
    "guitarist",
    "hairdresser",
    "historian",
    "housekeeper",
    "illustrator",
    "inspector",
    "instructor",
    "interpreter",
    "inventor",
    "investigator",
    "janitor",
    "jeweler",
    "journalist",
    "judge",
    "laborer",
    "lawyer",
    "lecturer",
    "librarian",
    "lifeguard",
    "linguist",
    "locksmith",
    "machinist",
    "magician",
    "manager",
    "mathematician",
    "mechanic",
    "mediator",
    "merchant",
    "messenger",
    "miner",
    "minister",
    "musician",
    "narrator",
    "navigator",
    "negotiator",
    "novelist",
    "nurse",
    "nutritionist",
    "officer",
    "optician",
    "organizer",
    "painter",
    "paramedic",
    "pharmacist",
    "philosopher",
    "photographer",
    "physician",
    "physicist",
    "pianist",
    "pilot",
    "planner",
    "plumber",
    "poet",
    "politician",
    "potter",
    "preacher",
    "president",
    "principal",
    "producer",
    "professor",
    "programmer",
    "promoter",
    "prosecutor",
    "psychiatrist",
    "psychologist",
    "publisher",
    "ranger",
    "receptionist",
    "referee",
    "reporter",
    "researcher",
    "sailor",
    "salesperson",
    "scholar",
    "scientist",
    "sculptor",
    "secretary",
    "senator",
    "sergeant",
    "sheriff",
    "singer",
    "soldier",
    "solicitor",
    "strategist",
    "student",
    "supervisor",
    "surgeon",
    "surveyor",
    "tailor",
    "teacher",
    "technician",
    "therapist",
    "trader",
    "translator",
    "treasurer",
    "trainer",
    "tutor",
    "veterinarian",
    "violinist",
    "warden",
    "welder",
    "writer",
)


def pluralize(noun: str) -> str:
    return f"{noun}s"


def third_person(verb: str) -> str:
    return f"{verb}s"


@dataclass(frozen=True)
class Lexicon:
    """
    The pools the agreement and gender generators draw from.

    The default instance holds 20 subject/object nouns, 15 verbs, 10 adverbs, 5 prepositions,
    10 proper nouns, 10 location nouns and 169 occupations.
    """

    nouns: tuple[str, ...] = SUBJECT_NOUNS
    verbs: tuple[str, ...] = VERBS
    adverbs: tuple[str, ...] = ADVERBS
    prepositions: tuple[str, ...] = PREPOSITIONS
    proper_nouns: tuple[str, ...] = PROPER_NOUNS
    locations: tuple[str, ...] = LOCATION_NOUNS
    occupations: tuple[str, ...] = OCCUPATIONS
    gender_templates: tuple[str, ...] = GENDER_TEMPLATES

    def noun_form(self, noun: str, number: str) -> str:
        return noun if number == SINGULAR else pluralize(noun)

    def verb_form(self, verb: str, number: str) -> str:
        return third_person(verb) if number == SINGULAR else verb

    def noun_number(self, token: str) -> Optional[tuple[str, str]]:
        """Return ``(lemma, number)`` if ``token`` is an inflected subject/object noun"""
        for noun in self.nouns:
            if token == noun:
                return noun, SINGULAR
            if token == pluralize(noun):
                return noun, PLURAL
        return None

    def verb_number(self, token: str) -> Optional[tuple[str, str]]:
        """Return ``(lemma, number)`` if ``token`` is an inflected verb"""
        for verb in self.verbs:
            if token == verb:
                return verb, PLURAL
            if token == third_person(verb):
                return verb, SINGULAR
        return None

    def sizes(self) -> dict[str, int]:
        return {
            "nouns": len(self.nouns),
            "verbs": len(self.verbs),
            "adverbs": len(self.adverbs),
            "prepositions": len(self.prepositions),
            "proper_nouns": len(self.proper_nouns),
            "locations": len(self.locations),
            "occupations": len(self.occupations),
            "gender_templates": len(self.gender_templates),
        }
