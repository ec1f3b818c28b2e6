"""Prompt assembly for every gateway call site.

System prompts live as text assets; user messages follow a line-oriented
convention (QUERY:, CANDIDATES:, ALREADY:, PERSONA:, HISTORY:, DRAFT_PLAN:,
FINDINGS:, VARIANT:) so that rule-based and scripted providers can parse the
same prompt a hosted model would receive.
"""
from __future__ import annotations

from functools import lru_cache
from importlib import resources

from .types import ChatRequest

CANDIDATE_SEP = " | "


@lru_cache(maxsize=None)
def system_prompt(tag: str) -> str:
    ref = resources.files("filingswarm.assets.prompts").joinpath(f"{tag}.txt")
    return ref.read_text(encoding="utf-8")


def build_classify_request(query: str) -> ChatRequest:
    return ChatRequest(
        system_prompt=system_prompt("classify"),
        messages=(("user", f"QUERY: {query}"),),
        tag="classify",
    )


def build_rewrite_request(query: str) -> ChatRequest:
    return ChatRequest(
        system_prompt=system_prompt("rewrite"),
        messages=(("user", f"QUERY: {query}"),),
        tag="rewrite",
    )


def build_decompose_request(query: str) -> ChatRequest:
    return ChatRequest(
        system_prompt=system_prompt("decompose"),
        messages=(("user", f"QUERY: {query}"),),
        tag="decompose",
    )


def build_route_agent_request(query: str, candidates: list[str],
                              covered: list[tuple[str, str]] = (),
                              persona: str | None = None,
                              history: list[str] | None = None) -> ChatRequest:
    lines = []
    if persona:
        lines.append(f"PERSONA: {persona}")
    lines.append(f"QUERY: {query}")
    lines.append(f"CANDIDATES: {CANDIDATE_SEP.join(candidates)}")
    for agent, table in covered:
        lines.append(f"ALREADY: agent={agent} table={table}")
    if history:
        lines.append("HISTORY:")
        lines.extend(f"- {entry}" for entry in history)
    return ChatRequest(
        system_prompt=system_prompt("route_agent"),
        messages=(("user", "\n".join(lines)),),
        tag="route_agent",
    )


def build_route_table_request(query: str, agent: str, candidates: list[str],
                              covered: list[tuple[str, str]] = (),
                              persona: str | None = None,
                              history: list[str] | None = None) -> ChatRequest:
    lines = []
    if persona:
        lines.append(f"PERSONA: {persona}")
    lines.append(f"QUERY: {query}")
    lines.append(f"AGENT: {agent}")
    lines.append(f"CANDIDATES: {CANDIDATE_SEP.join(candidates)}")
    for cov_agent, cov_table in covered:
        lines.append(f"ALREADY: agent={cov_agent} table={cov_table}")
    if history:
        lines.append("HISTORY:")
        lines.extend(f"- {entry}" for entry in history)
    return ChatRequest(
        system_prompt=system_prompt("route_table"),
        messages=(("user", "\n".join(lines)),),
        tag="route_table",
    )


def build_plan_request(subquery_texts: list[str]) -> ChatRequest:
    lines = [f"QUERY: {text}" for text in subquery_texts]
    return ChatRequest(
        system_prompt=system_prompt("plan"),
        messages=(("user", "\n".join(lines)),),
        max_tokens=2048,
        tag="plan",
    )


def build_replan_request(query: str, plan_json: str, findings_lines: list[str]) -> ChatRequest:
    lines = [f"QUERY: {query}", f"DRAFT_PLAN: {plan_json}", "FINDINGS:"]
    lines.extend(f"- {entry}" for entry in findings_lines)
    return ChatRequest(
        system_prompt=system_prompt("replan"),
        messages=(("user", "\n".join(lines)),),
        max_tokens=2048,
        tag="replan",
    )


def build_variegate_request(query: str, variant_index: int) -> ChatRequest:
    lines = [f"QUERY: {query}", f"VARIANT: {variant_index}"]
    return ChatRequest(
        system_prompt=system_prompt("variegate"),
        messages=(("user", "\n".join(lines)),),
        tag="variegate",
    )
