"""Answer refinement prompts and the feedback-then-refine pipeline.

Three prompt flavors:

- improve:         re-prompt with the original answer, no error feedback
- generic:         add a blanket "the answer is not complete" nudge
- error_informed:  feed the selected feedback's numbered justifications

``run_eir`` chains the two models: sample feedback, and only when some
sentence was tagged Incomplete, refine with the numbered reasons; otherwise
the original answer passes through untouched so downstream error metrics
never see a gratuitous rewrite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .feedback import (
    DEFAULT_N_SAMPLES,
    FeedbackResult,
    LOW_CONFIDENCE_THRESHOLD,
    run_feedback,
)
from .genclient import GenerationClient, GenerationError, GenerationRequest

REFINE_TEMPERATURE = 0.1
ANSWER_LENGTH_FACTOR = 1.5  # max_tokens budget relative to the answer word count


class RefineMode(str, Enum):
    IMPROVE = "improve"
    GENERIC = "generic"
    ERROR_INFORMED = "error_informed"


def build_refine_prompt(
    mode: RefineMode,
    question: str,
    answer: str,
    reasons: list[str] | None = None,
) -> str:
    """Render the refinement prompt for one answer.

    ``reasons`` are required (and rendered as a numbered list) only in
    error_informed mode.
    """
    if mode is RefineMode.ERROR_INFORMED:
        if not reasons:
            raise ValueError("error_informed mode requires at least one reason")
        numbered = "\n".join(f"{i + 1}. {r}" for i, r in enumerate(reasons))
        middle = f'The answer is not complete because: \n"{numbered}".\n'
    elif mode is RefineMode.GENERIC:
        middle = "The answer is not complete.\n"
    else:
        middle = ""
    return (
        f'\nAnswer the following question: "{question}"\n'
        f'Your answer is: "{answer}".\n'
        f"{middle}"
        "Please improve your answer.\n"
        "Your improved answer:\n\n"
    )


def refine_max_tokens(answer: str) -> int:
    return max(1, math.ceil(ANSWER_LENGTH_FACTOR * len(answer.split())))


def build_answer_prompt(question: str, target_words: int) -> str:
    """Zero-shot prompt for generating a long-form answer from scratch.

    Provided as a template only; the toolkit evaluates and refines answers
    but does not judge from-scratch generation quality.
    """
    return (
        "Your task is to answer a question by providing a clear and concise "
        "explanation of a complex concept in a way that is accessible for "
        "laypeople. The question was posted on the Reddit forum Explain Like "
        "I'm Five (r/explainlikeimfive). Please keep in mind that the "
        "question is not literally meant for 5-year-olds, so you should not "
        "answer the question in a way that you are talking to a child. Your "
        f"answer should be around {target_words} words and should break down "
        "the concept into understandable parts, providing relevant examples "
        "or analogies where appropriate. You should also aim to make your "
        "explanation easy to follow, using clear and concise language "
        "throughout. Your answer should maintain accuracy and clarity. When "
        "appropriate, you can start with one sentence summarizing the main "
        "idea of the answer.\n"
        "\n"
        f"Question: {question}   \n"
        "\n"
        f"Answer (around {target_words} words):\n"
    )


@dataclass
class RefinementRecord:
    record_id: str
    question: str
    original_answer: str
    mode: RefineMode
    feedback: FeedbackResult | None
    refined_answer: str
    passthrough: bool
    answer_index: int = 0
    prompt: str = ""  # the refine prompt actually sent ("" on passthrough)

    def to_dict(self, audit: bool = False) -> dict:
        out = {
            "record_id": self.record_id,
            "answer_index": self.answer_index,
            "mode": self.mode.value,
            "passthrough": self.passthrough,
            "refined_answer": self.refined_answer,
            "feedback": self.feedback.to_dict(audit) if self.feedback else None,
        }
        if audit:
            out["question"] = self.question
            out["original_answer"] = self.original_answer
            out["prompt"] = self.prompt
        return out


def refine_answer(
    question: str,
    answer: str,
    mode: RefineMode,
    reasons: list[str] | None,
    client: GenerationClient,
    *,
    temperature: float = REFINE_TEMPERATURE,
    max_tokens: int | None = None,
    record_id: str = "",
    answer_index: int = 0,
    feedback: FeedbackResult | None = None,
) -> RefinementRecord:
    """Issue one refinement generation and wrap it as a record."""
    prompt = build_refine_prompt(mode, question, answer, reasons)
    request = GenerationRequest(
        prompt=prompt,
        max_tokens=max_tokens or refine_max_tokens(answer),
        temperature=temperature,
        n_samples=1,
        metadata=record_id,
    )
    result = client.generate(request)
    refined = result.texts[0].strip()
    if not refined:
        raise GenerationError(f"empty refinement for record '{record_id}'")
    return RefinementRecord(
        record_id=record_id,
        question=question,
        original_answer=answer,
        mode=mode,
        feedback=feedback,
        refined_answer=refined,
        passthrough=False,
        answer_index=answer_index,
        prompt=prompt,
    )


def run_eir(
    question: str,
    answer: str,
    feedback_client: GenerationClient,
    refine_client: GenerationClient,
    n_samples: int = DEFAULT_N_SAMPLES,
    *,
    feedback_temperature: float,
    refine_temperature: float = REFINE_TEMPERATURE,
    feedback_max_tokens: int | None = None,
    refine_max_tokens_override: int | None = None,
    low_confidence_threshold: float = LOW_CONFIDENCE_THRESHOLD,
    record_id: str = "",
    answer_index: int = 0,
) -> RefinementRecord:
    """Feedback then error-informed refinement for one answer.

    All-Complete feedback yields a passthrough record and issues no
    refinement call.
    """
    feedback = run_feedback(
        question,
        answer,
        feedback_client,
        n_samples,
        temperature=feedback_temperature,
        max_tokens=feedback_max_tokens,
        low_confidence_threshold=low_confidence_threshold,
        metadata=record_id,
    )
    incomplete = feedback.selected.incomplete_indices()
    if not incomplete:
        return RefinementRecord(
            record_id=record_id,
            question=question,
            original_answer=answer,
            mode=RefineMode.ERROR_INFORMED,
            feedback=feedback,
            refined_answer=answer,
            passthrough=True,
            answer_index=answer_index,
        )
    reasons = [feedback.selected.reasons[i] for i in sorted(incomplete)]
    return refine_answer(
        question,
        answer,
        RefineMode.ERROR_INFORMED,
        reasons,
        refine_client,
        temperature=refine_temperature,
        max_tokens=refine_max_tokens_override,
        record_id=record_id,
        answer_index=answer_index,
        feedback=feedback,
    )
