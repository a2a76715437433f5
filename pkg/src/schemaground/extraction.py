"""Schema extraction: obtain a validated SchemaProgram for a concept via a
chat backend, with corrective retries and a canonical fixture fallback.

The canonical store ships twelve `<concept>.schema` files as package data,
one per benchmark concept, grouped into four categories.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

from .dsl import SchemaProgram, parse_schema
from .errors import (
    ConceptMismatchError,
    ExtractionFailedError,
    GatewayError,
    SchemaError,
    UnknownConceptError,
)
from .gateway import Message, ModelGateway

EXTRACTION_PROMPT = """\
Can you give me a program representing the schema for a concept? For example,
gen(concept=academia) =
    gen(faculty | concept=academia)
    gen(students | concept=academia)
    gen(research-output | concept=academia, faculty, students)
Please do the same for gen(concept=[abstract-concept]) in the same format without explanation. Keep the program simple with four or less components. Use only the most necessary parts of the schema that can be mapped to objects in an image."""

CONCEPT_CATEGORIES = {
    "tic-tac-toe": "strategic",
    "maze": "strategic",
    "treasure-map": "strategic",
    "solar-system": "scientific",
    "atom": "scientific",
    "cell": "scientific",
    "helping": "social",
    "deceiving": "social",
    "negotiating": "social",
    "setting-up-table-for-two": "domestic",
    "tidying-up-guest-room": "domestic",
    "putting-up-decorations-on-door": "domestic",
}

CATEGORIES = ("strategic", "scientific", "social", "domestic")


def canonical_concepts() -> tuple[str, ...]:
    return tuple(CONCEPT_CATEGORIES)


def build_extraction_prompt(concept: str) -> str:
    if not concept:
        raise ValueError("concept must be non-empty")
    return EXTRACTION_PROMPT.replace("[abstract-concept]", concept)


def load_canonical_schema(concept: str) -> SchemaProgram:
    """Load and parse the stored fixture for one of the 12 benchmark concepts."""
    if concept not in CONCEPT_CATEGORIES:
        raise UnknownConceptError(
            f"no canonical schema for {concept!r}; known concepts: "
            + ", ".join(canonical_concepts())
        )
    resource = importlib.resources.files("schemaground").joinpath(
        "schemas", f"{concept}.schema"
    )
    return parse_schema(resource.read_text(encoding="utf-8"))


def scrape_schema_block(reply: str) -> str:
    """Pull the schema program block out of a chat reply.

    Markdown code fences are dropped, then everything from the first
    `gen(...) =` header line onward is kept; trailing prose after the node
    lines is tolerated by the parser itself.
    """
    lines = [line for line in reply.splitlines() if not line.lstrip().startswith("```")]
    for index, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith("gen") and stripped.endswith("="):
            return "\n".join(lines[index:])
    raise SchemaError("reply contains no schema header line")


@dataclass
class ExtractionPolicy:
    """Controls the retry/fallback behaviour of extract_schema."""

    gateway: ModelGateway
    max_retries: int = 2
    fallback_to_canonical: bool = False

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class ExtractionResult:
    program: SchemaProgram
    raw_reply: str
    attempts: int
    used_fallback: bool


def extract_schema(concept: str, policy: ExtractionPolicy) -> ExtractionResult:
    """Ask the backend for a schema program and validate the reply.

    On a parse/validation failure the validator's message is appended as a
    corrective user turn and the exchange retried, up to max_retries extra
    rounds. Exhausted retries fall back to the canonical fixture when the
    policy allows it, else raise ExtractionFailed carrying the last reason.
    """
    messages: list[Message] = [Message("user", build_extraction_prompt(concept))]
    last_reason: Exception | None = None
    attempts = 0
    for _ in range(policy.max_retries + 1):
        attempts += 1
        try:
            response = policy.gateway.chat(messages)
        except GatewayError as err:
            last_reason = err
            break
        try:
            program = parse_schema(scrape_schema_block(response.text))
            if program.concept != concept:
                raise ConceptMismatchError(
                    f"program declares concept {program.concept!r}, expected {concept!r}"
                )
            return ExtractionResult(
                program=program,
                raw_reply=response.text,
                attempts=attempts,
                used_fallback=False,
            )
        except SchemaError as err:
            last_reason = err
            messages.append(Message("assistant", response.text))
            messages.append(
                Message(
                    "user",
                    f"That program is invalid: {err}. "
                    "Please reply with a corrected program in the same format.",
                )
            )
    if policy.fallback_to_canonical:
        program = load_canonical_schema(concept)
        return ExtractionResult(
            program=program, raw_reply="", attempts=attempts, used_fallback=True
        )
    raise ExtractionFailedError(concept, last_reason)
