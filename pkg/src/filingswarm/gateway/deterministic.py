"""Rule-based completion provider.

A deterministic stand-in for a hosted model: it reads the same prompts a
remote model would receive and answers from keyword rules. Question stems it
recognizes get full routing and planning treatment; anything else falls back
to keyword scoring, and scoreless prompts get a refusal the callers treat as
a parse failure. The rules are intentionally coupled to the default schema
registry; this provider is the offline analyst for that corpus domain, not a
general model.
"""
from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass

from .types import ChatRequest, ChatResponse, GatewayError

REFUSAL = "none of these"

_CUE_WORDS = (
    "get", "calculate", "identify", "list", "what", "how many", "retrieve",
    "fetch", "find", "show", "total", "aggregate", "which", "sum", "work out",
    "point out", "break", "compare",
)
_CUE_RE = re.compile(r"\b(?:" + "|".join(re.escape(c) for c in _CUE_WORDS) + r")\b",
                     re.IGNORECASE)

_FILLERS = (
    "i want to know", "can you", "could you", "tell me", "please", "kindly",
    "um", "uh", "hey", "just", "basically", "like, ", "sort of", "kind of",
)
_FILLER_RE = re.compile(r"\b(?:" + "|".join(re.escape(f) for f in _FILLERS) + r")\b[,]?",
                        re.IGNORECASE)

# (template id, phrases that must all appear, ordered (agent, table) routes)
_TEMPLATES: tuple[tuple[str, tuple[str, ...], tuple[tuple[str, str], ...]], ...] = (
    ("E0", ("cash equity position",), (("13F", "thirteenf_holdings"),)),
    ("E1", ("option position",), (("13F", "thirteenf_holdings"),)),
    ("E2", ("regulatory aum",), (("ADV", "adv_entity"),)),
    ("E3", ("funds managed by",), (("NCEN", "ncen_fund_registry"),)),
    ("E4", ("prime broker",), (("ADV", "adv_brokers"),)),
    ("E5", ("country-level aum",), (("NCEN", "ncen_fund_registry"), ("NPORT", "nport_holdings"))),
    ("E6", ("money market net assets",), (("NCEN", "ncen_fund_registry"), ("NMFP", "nmfp_fund_info"))),
    ("H0", ("holdings of instrument type",), (("NPORT", "nport_fund_info"), ("NPORT", "nport_holdings"))),
    ("H1", ("counterparty split",), (("NCEN", "ncen_fund_registry"), ("NPORT", "nport_derivatives"))),
    ("H2", ("custom basket",), (("NPORT", "nport_fund_info"), ("NPORT", "nport_derivatives"))),
    ("H3", ("total assets", "annual report"), (("NCSR", "ncsr_statement_items"),)),
)

_AGENT_KEYWORDS: dict[str, tuple[tuple[str, int], ...]] = {
    "13F": (("institutional manager", 3), ("13f", 2), ("equity position", 2),
            ("option", 1), ("shares", 1)),
    "NPORT": (("derivative", 2), ("counterparty", 2), ("basket", 2),
              ("portfolio", 1), ("country", 1), ("holding", 1), ("instrument", 1)),
    "NMFP": (("money market", 3), ("seven", 1), ("maturity", 1)),
    "NCEN": (("census", 2), ("managed by", 2), ("service provider", 2),
             ("trust", 1), ("registered", 1), ("advisor", 1), ("adviser", 1),
             ("custodian", 1)),
    "NCSR": (("annual report", 3), ("shareholder", 2), ("statement", 1),
             ("expense", 1), ("fiscal", 1)),
    "ADV": (("assets under management", 3), ("aum", 2), ("brokerage", 2),
            ("disclosure", 2), ("regulatory", 1), ("broker", 1)),
}

_TABLE_KEYWORDS: dict[str, tuple[tuple[str, int], ...]] = {
    "thirteenf_holdings": (("option", 1), ("equity", 1), ("position", 1), ("holding", 1)),
    "adv_entity": (("aum", 2), ("regulatory", 1), ("employee", 1), ("client", 1)),
    "adv_brokers": (("broker", 2), ("prime", 1)),
    "adv_disclosures": (("disclosure", 2), ("complaint", 1), ("event", 1)),
    "ncen_fund_registry": (("managed", 1), ("advisor", 1), ("adviser", 1),
                           ("registry", 1), ("fund", 1)),
    "ncen_trust_registry": (("trust", 2),),
    "ncen_service_providers": (("auditor", 2), ("custodian", 2), ("service", 1), ("provider", 1)),
    "nport_fund_info": (("total assets", 2), ("net assets", 1), ("fund", 1)),
    "nport_holdings": (("country", 2), ("holding", 1), ("issuer", 1), ("instrument", 1)),
    "nport_derivatives": (("derivative", 2), ("counterparty", 2), ("basket", 2),
                          ("notional", 2), ("expir", 1)),
    "nmfp_fund_info": (("net assets", 2), ("yield", 1)),
    "nmfp_holdings": (("maturity", 1), ("holding", 1), ("issuer", 1), ("category", 1)),
    "ncsr_report_meta": (("auditor", 2), ("fiscal", 1)),
    "ncsr_statement_items": (("total assets", 2), ("statement", 2), ("asset total", 2),
                             ("expense", 1), ("income", 1), ("liabilit", 1)),
    "ncsr_portfolio": (("security", 1), ("portfolio", 1)),
}

# Strong paraphrases deliberately reword a stem's key phrase; routing and
# planning rules then lose their anchor, which is what makes the variegated
# split genuinely harder than the templated one.
_BREAKING_SWAPS = (
    ("option positions", "derivative contracts"),
    ("country-level AUM", "geographic exposure totals"),
    ("money market net assets", "cash management fund balances"),
    ("holdings of instrument type", "positions in the asset class"),
    ("counterparty split", "dealer exposure breakdown"),
    ("custom baskets", "bespoke structured bundles"),
    ("total assets from the annual report",
     "asset total from the yearly shareholder statement"),
)

_MILD_SWAPS = (
    ("Get the", "Retrieve the"),
    ("Get all", "List all"),
    ("Calculate the", "Work out the"),
    ("Identify", "Point out"),
)

_RE_MANAGER = re.compile(r'manager\s+"([^"]+)"', re.IGNORECASE)
_RE_ADVISOR = re.compile(r'advis[oe]r\s+"([^"]+)"', re.IGNORECASE)
_RE_FUND = re.compile(r'fund\s+"([^"]+)"', re.IGNORECASE)
_RE_INSTRUMENT = re.compile(r'(?:type|class)\s+"([^"]+)"', re.IGNORECASE)
_RE_PERIOD = re.compile(r'period\s+(\d{4}-\d{2}-\d{2})', re.IGNORECASE)
_RE_CUTOFF = re.compile(r'(?:before|by)\s+(\d{4}-\d{2}-\d{2})', re.IGNORECASE)


@dataclass
class _Prompt:
    query: str
    candidates: list[str]
    covered: int
    persona: str
    variant: int
    draft_plan: str
    findings: list[str]


def _parse_prompt(content: str) -> _Prompt:
    queries: list[str] = []
    candidates: list[str] = []
    covered = 0
    persona = ""
    variant = 1
    draft_plan = ""
    findings: list[str] = []
    in_findings = False
    for line in content.splitlines():
        if line.startswith("QUERY: "):
            queries.append(line[len("QUERY: "):])
            in_findings = False
        elif line.startswith("CANDIDATES: "):
            candidates = [c.strip() for c in line[len("CANDIDATES: "):].split("|")]
            in_findings = False
        elif line.startswith("ALREADY: "):
            covered += 1
        elif line.startswith("PERSONA: "):
            persona = line[len("PERSONA: "):]
        elif line.startswith("VARIANT: "):
            try:
                variant = int(line[len("VARIANT: "):])
            except ValueError:
                variant = 1
        elif line.startswith("DRAFT_PLAN: "):
            draft_plan = line[len("DRAFT_PLAN: "):]
        elif line.startswith("FINDINGS:"):
            in_findings = True
        elif in_findings and line.startswith("- "):
            findings.append(line[2:])
    return _Prompt(" ".join(queries), candidates, covered, persona, variant,
                   draft_plan, findings)


def _match_template(query: str) -> tuple[str, tuple[tuple[str, str], ...]] | None:
    low = query.lower()
    for template_id, phrases, routes in _TEMPLATES:
        if all(p in low for p in phrases):
            return template_id, routes
    return None


def _score(query: str, table: dict[str, tuple[tuple[str, int], ...]],
           keys: list[str]) -> list[tuple[str, int]]:
    low = query.lower()
    scored = []
    for key in keys:
        total = sum(w for phrase, w in table.get(key, ()) if phrase in low)
        scored.append((key, total))
    scored.sort(key=lambda kv: (-kv[1], kv[0]))
    return scored


def _slots(query: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for name, rx in (("manager", _RE_MANAGER), ("advisor", _RE_ADVISOR),
                     ("fund", _RE_FUND), ("instrument", _RE_INSTRUMENT),
                     ("cutoff", _RE_CUTOFF), ("period", _RE_PERIOD)):
        m = rx.search(query)
        if m:
            out[name] = m.group(1)
    return out


class DeterministicProvider:
    provider_id = "deterministic"

    def complete(self, request: ChatRequest) -> ChatResponse:
        start = time.perf_counter()
        prompt = _parse_prompt(request.last_user_content())
        handler = getattr(self, f"_do_{request.tag}", None)
        if handler is None:
            raise GatewayError(f"no rule for tag {request.tag!r}")
        content = handler(prompt)
        return ChatResponse(content=content, provider_id=self.provider_id,
                            latency=time.perf_counter() - start)

    # -- screening ---------------------------------------------------------

    def _do_classify(self, prompt: _Prompt) -> str:
        low = prompt.query.lower()
        has_cue = _CUE_RE.search(prompt.query) is not None
        domain = any(phrase in low
                     for rules in _AGENT_KEYWORDS.values()
                     for phrase, _ in rules)
        domain = domain or _match_template(prompt.query) is not None
        if has_cue and domain:
            return "non_hallucinatory 0.97"
        return "hallucinatory 0.88"

    def _do_rewrite(self, prompt: _Prompt) -> str:
        text = _FILLER_RE.sub(" ", prompt.query)
        text = " ".join(text.split()).strip(" ,")
        if not text:
            return "Get"
        if _CUE_RE.search(text) is None:
            text = f"Get {text}"
        text = text[0].upper() + text[1:]
        if not text.endswith((".", "?")):
            text += "."
        return text

    # -- decomposition -----------------------------------------------------

    def _do_decompose(self, prompt: _Prompt) -> str:
        matched = _match_template(prompt.query)
        slots = _slots(prompt.query)
        period = slots.get("period", "")
        if matched and period:
            template_id = matched[0]
            helper = {
                "E5": 'Resolve the fund identifiers registered to manager "{m}" in the fund census for period {p}.',
                "E6": 'Resolve the money market funds registered to advisor "{a}" for period {p}.',
                "H0": 'Resolve the fund identifier for fund "{f}" for period {p}.',
                "H1": 'Resolve the fund identifiers registered to advisor "{a}" for period {p}.',
                "H2": 'Resolve the fund identifier for fund "{f}" for period {p}.',
            }.get(template_id)
            if helper:
                try:
                    second = helper.format(m=slots.get("manager", ""),
                                           a=slots.get("advisor", ""),
                                           f=slots.get("fund", ""), p=period)
                except (KeyError, IndexError):
                    second = None
                if second:
                    return f"{prompt.query}\n{second}"
        return prompt.query

    # -- routing -----------------------------------------------------------

    def _ranked_with_persona(self, scored: list[tuple[str, int]], slot: int,
                             persona: str) -> str:
        if not scored or scored[0][1] <= 0:
            return REFUSAL
        bump = 1 if "contrarian" in persona.lower() else 0
        idx = (slot + bump) % len(scored)
        if scored[idx][1] <= 0:
            idx = 0
        return scored[idx][0]

    def _do_route_agent(self, prompt: _Prompt) -> str:
        matched = _match_template(prompt.query)
        if matched:
            routes = matched[1]
            if prompt.covered < len(routes):
                agent = routes[prompt.covered][0]
                for cand in prompt.candidates:
                    if cand.upper().replace("-", "") == agent.upper().replace("-", ""):
                        return cand
        scored = _score(prompt.query, _AGENT_KEYWORDS, prompt.candidates)
        return self._ranked_with_persona(scored, prompt.covered, prompt.persona)

    def _do_route_table(self, prompt: _Prompt) -> str:
        matched = _match_template(prompt.query)
        if matched:
            routes = matched[1]
            if prompt.covered < len(routes):
                table = routes[prompt.covered][1]
                if table in prompt.candidates:
                    return table
        scored = _score(prompt.query, _TABLE_KEYWORDS, prompt.candidates)
        return self._ranked_with_persona(scored, 0, prompt.persona)

    # -- planning ----------------------------------------------------------

    def _do_plan(self, prompt: _Prompt) -> str:
        matched = _match_template(prompt.query)
        slots = _slots(prompt.query)
        if not matched or "period" not in slots:
            return "CANNOT PLAN"
        builder = getattr(self, f"_plan_{matched[0]}", None)
        if builder is None:
            return "CANNOT PLAN"
        plan = builder(slots)
        if plan is None:
            return "CANNOT PLAN"
        return json.dumps(plan, sort_keys=True)

    def _do_replan(self, prompt: _Prompt) -> str:
        if prompt.draft_plan:
            return prompt.draft_plan
        return "CANNOT PLAN"

    @staticmethod
    def _retrieve(step_id: str, agent: str, table: str, filters: list,
                  columns: list[str] | None = None) -> dict:
        doc = {"id": step_id, "kind": "retrieve", "agent": agent, "table": table,
               "filters": filters}
        if columns is not None:
            doc["columns"] = columns
        return doc

    def _plan_E0(self, slots: dict[str, str]) -> dict | None:
        if "manager" not in slots:
            return None
        return {"steps": [
            self._retrieve("r1", "13F", "thirteenf_holdings", [
                ["manager_name", "eq", slots["manager"]],
                ["period", "eq", slots["period"]],
                ["security_class", "eq", "COM"]]),
            {"id": "a1", "kind": "aggregate", "input": "r1", "function": "sum",
             "value_field": "value_usd"},
            {"id": "ret", "kind": "return", "input": "a1"}]}

    def _plan_E1(self, slots: dict[str, str]) -> dict | None:
        if "manager" not in slots:
            return None
        return {"steps": [
            self._retrieve("r1", "13F", "thirteenf_holdings", [
                ["manager_name", "eq", slots["manager"]],
                ["period", "eq", slots["period"]],
                ["security_class", "contains", "OPT"]]),
            {"id": "a1", "kind": "aggregate", "input": "r1", "function": "sum",
             "value_field": "value_usd"},
            {"id": "ret", "kind": "return", "input": "a1"}]}

    def _plan_E2(self, slots: dict[str, str]) -> dict | None:
        if "advisor" not in slots:
            return None
        return {"steps": [
            self._retrieve("r1", "ADV", "adv_entity", [
                ["advisor_name", "eq", slots["advisor"]],
                ["period", "eq", slots["period"]]]),
            {"id": "a1", "kind": "aggregate", "input": "r1", "function": "sum",
             "value_field": "regulatory_aum"},
            {"id": "ret", "kind": "return", "input": "a1"}]}

    def _plan_E3(self, slots: dict[str, str]) -> dict | None:
        if "advisor" not in slots:
            return None
        return {"steps": [
            self._retrieve("r1", "NCEN", "ncen_fund_registry", [
                ["advisor_name", "eq", slots["advisor"]],
                ["period", "eq", slots["period"]]], ["fund_name"]),
            {"id": "ret", "kind": "return", "input": "r1"}]}

    def _plan_E4(self, slots: dict[str, str]) -> dict | None:
        if "advisor" not in slots:
            return None
        return {"steps": [
            self._retrieve("r1", "ADV", "adv_brokers", [
                ["advisor_name", "eq", slots["advisor"]],
                ["relation", "eq", "prime broker"],
                ["period", "eq", slots["period"]]], ["broker_name"]),
            {"id": "ret", "kind": "return", "input": "r1"}]}

    def _plan_E5(self, slots: dict[str, str]) -> dict | None:
        name = slots.get("manager") or slots.get("advisor")
        if not name:
            return None
        p = slots["period"]
        return {"steps": [
            self._retrieve("r1", "NCEN", "ncen_fund_registry", [
                ["advisor_name", "eq", name], ["period", "eq", p]], ["fund_id"]),
            self._retrieve("r2", "NPORT", "nport_holdings", [
                ["period", "eq", p]], ["fund_id", "country", "value_usd"]),
            {"id": "j1", "kind": "join", "left": "r1", "right": "r2", "on": ["fund_id"]},
            {"id": "g1", "kind": "aggregate", "input": "j1", "function": "groupby-sum",
             "group_fields": ["country"], "value_field": "value_usd"},
            {"id": "ret", "kind": "return", "input": "g1"}]}

    def _plan_E6(self, slots: dict[str, str]) -> dict | None:
        if "advisor" not in slots:
            return None
        p = slots["period"]
        return {"steps": [
            self._retrieve("r1", "NCEN", "ncen_fund_registry", [
                ["advisor_name", "eq", slots["advisor"]],
                ["fund_type", "eq", "money market"],
                ["period", "eq", p]], ["fund_id", "fund_name"]),
            self._retrieve("r2", "NMFP", "nmfp_fund_info", [
                ["period", "eq", p]], ["fund_id", "net_assets"]),
            {"id": "j1", "kind": "join", "left": "r1", "right": "r2", "on": ["fund_id"]},
            {"id": "g1", "kind": "aggregate", "input": "j1", "function": "groupby-sum",
             "group_fields": ["fund_name"], "value_field": "net_assets"},
            {"id": "ret", "kind": "return", "input": "g1"}]}

    def _plan_H0(self, slots: dict[str, str]) -> dict | None:
        if "fund" not in slots or "instrument" not in slots:
            return None
        p = slots["period"]
        return {"steps": [
            self._retrieve("r1", "NPORT", "nport_fund_info", [
                ["fund_name", "eq", slots["fund"]], ["period", "eq", p]], ["fund_id"]),
            self._retrieve("r2", "NPORT", "nport_holdings", [
                ["instrument_type", "eq", slots["instrument"]],
                ["period", "eq", p]],
                ["fund_id", "issuer_name", "cusip", "country", "value_usd", "shares"]),
            {"id": "j1", "kind": "join", "left": "r1", "right": "r2", "on": ["fund_id"]},
            {"id": "ret", "kind": "return", "input": "j1"}]}

    def _plan_H1(self, slots: dict[str, str]) -> dict | None:
        if "advisor" not in slots:
            return None
        p = slots["period"]
        return {"steps": [
            self._retrieve("r1", "NCEN", "ncen_fund_registry", [
                ["advisor_name", "eq", slots["advisor"]],
                ["period", "eq", p]], ["fund_id"]),
            self._retrieve("r2", "NPORT", "nport_derivatives", [
                ["period", "eq", p]], ["fund_id", "counterparty_name", "notional_value"]),
            {"id": "j1", "kind": "join", "left": "r1", "right": "r2", "on": ["fund_id"]},
            {"id": "g1", "kind": "aggregate", "input": "j1", "function": "groupby-sum",
             "group_fields": ["counterparty_name"], "value_field": "notional_value"},
            {"id": "ret", "kind": "return", "input": "g1"}]}

    def _plan_H2(self, slots: dict[str, str]) -> dict | None:
        if "fund" not in slots or "cutoff" not in slots:
            return None
        p = slots["period"]
        return {"steps": [
            self._retrieve("r1", "NPORT", "nport_fund_info", [
                ["fund_name", "eq", slots["fund"]], ["period", "eq", p]], ["fund_id"]),
            self._retrieve("r2", "NPORT", "nport_derivatives", [
                ["derivative_type", "eq", "custom basket"],
                ["expiration_date", "range", [None, slots["cutoff"]]],
                ["period", "eq", p]],
                ["fund_id", "derivative_type", "counterparty_name", "underlying",
                 "notional_value", "expiration_date"]),
            {"id": "j1", "kind": "join", "left": "r1", "right": "r2", "on": ["fund_id"]},
            {"id": "ret", "kind": "return", "input": "j1"}]}

    def _plan_H3(self, slots: dict[str, str]) -> dict | None:
        # The annual-report line items are labeled inconsistently across
        # filers; a substring guess is the best a rule can do here, and it
        # does not survive every label style.
        if "fund" not in slots:
            return None
        return {"steps": [
            self._retrieve("r1", "NCSR", "ncsr_statement_items", [
                ["fund_name", "eq", slots["fund"]],
                ["period", "eq", slots["period"]],
                ["label", "contains", "total assets"]]),
            {"id": "a1", "kind": "aggregate", "input": "r1", "function": "sum",
             "value_field": "value_usd"},
            {"id": "ret", "kind": "return", "input": "a1"}]}

    # -- variegation -------------------------------------------------------

    def _do_variegate(self, prompt: _Prompt) -> str:
        text = prompt.query
        if prompt.variant % 2 == 1:
            return self._mild_paraphrase(text)
        swapped = text
        low = swapped.lower()
        applied = False
        for phrase, replacement in _BREAKING_SWAPS:
            idx = low.find(phrase.lower())
            if idx >= 0:
                swapped = swapped[:idx] + replacement + swapped[idx + len(phrase):]
                low = swapped.lower()
                applied = True
        if not applied:
            swapped = swapped.replace("for period", "covering period")
            swapped = swapped.replace("aggregate", "combined")
        for old, new in _MILD_SWAPS:
            if swapped.startswith(old):
                swapped = new + swapped[len(old):]
                break
        return swapped

    @staticmethod
    def _mild_paraphrase(text: str) -> str:
        m = re.search(r'\s+for period (\d{4}-\d{2}-\d{2})\.?$', text)
        if m:
            body = text[:m.start()].rstrip(".")
            out = f"For period {m.group(1)}, {body[0].lower()}{body[1:]}."
        else:
            out = text
        for old, new in _MILD_SWAPS:
            idx = out.find(old)
            if idx >= 0:
                out = out[:idx] + new + out[idx + len(old):]
                break
        return out
