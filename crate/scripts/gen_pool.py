#!/usr/bin/env python3
"""Generates data/default_pool.jsonl: 324 prompts, 108 per stratum, 27 per
route inside each stratum, 32 of them state-sensitive. Deterministic."""

import itertools
import json
import random
import sys
from pathlib import Path

SEED = 20240601
PER_CELL = 27
STATE_PER_ROUTE_STRATUM = {"complex": 4, "edge": 4}

T = {
    "chat": {
        "simple": (
            ["What do you think about {x}?", "Tell me something fun about {x}.", "Do you like {x}?"],
            ["rainy weekends", "jazz", "the ocean", "chess", "autumn", "space travel", "street food",
             "old movies", "board games", "sunrises", "mountain hiking", "cats"],
        ),
        "complex": (
            ["I've been feeling {y} lately about {x}; can we just talk it through for a bit?",
             "My friend and I argued about {x} and I'm {y} about it. What's your take, casually?",
             "No task here, I'm {y} and want to chat about {x} for a minute."],
            ["my career", "moving cities", "learning piano", "a book I finished", "getting older",
             "a trip I took", "my garden"],
            ["unsure", "excited", "a bit down", "curious"],
        ),
        "edge": (
            ["hey... {x}", "{x} lol", "random thought: {x}?", "ok but {x}"],
            ["is a hotdog a sandwich", "cats or dogs", "best pizza topping", "why is the sky blue",
             "do fish sleep", "favorite color", "what's up", "tell me a joke", "is pluto a planet"],
        ),
    },
    "task": {
        "simple": (
            ["Remind me to {x} {t}.", "Add '{x}' to my to-do list for {t}.", "Schedule time to {x} {t}."],
            ["call the dentist", "pay rent", "buy groceries", "renew my passport", "water the plants",
             "book a haircut", "pick up dry cleaning", "email the landlord", "submit the expense claim"],
            ["tomorrow at 9", "on Friday", "next Monday"],
        ),
        "complex": (
            ["Move my {x} to {t} and let everyone invited know about the change.",
             "Find a slot {t} for {x}, avoid my lunch break, and send invites.",
             "Cancel {x} {t}, then set a reminder to reschedule it next week."],
            ["standup with the design team", "1:1 with Priya", "quarterly planning review",
             "doctor's appointment", "call with the bank", "gym session", "parent-teacher meeting",
             "team offsite prep", "car service"],
            ["this Thursday afternoon", "early next week", "the day after tomorrow"],
        ),
        "edge": (
            ["{x} {t} pls", "dont let me forget {x} {t}", "{x}!! {t}"],
            ["mom bday", "trash night", "flight checkin", "vet appt", "meds", "tax deadline",
             "laundry", "rent", "gift for sam"],
            ["tmrw", "fri", "asap"],
        ),
    },
    "dev": {
        "simple": (
            ["Fix the {x} in {f}.", "Write a unit test for {f} covering the {x}.", "Why does {f} throw a {x}?"],
            ["null pointer", "off-by-one error", "timeout", "race condition", "type error",
             "memory leak", "parse failure", "deadlock", "encoding bug"],
            ["parser.rs", "app.py", "server.go"],
        ),
        "complex": (
            ["The CI pipeline fails on {f} only under {x}; bisect the commits and propose a patch.",
             "Refactor {f} to remove the {x} without changing its public API, and update the tests.",
             "Profile {f}: latency spikes appear under {x}. Suggest and implement a fix."],
            ["high load", "the ARM runners", "Python 3.12", "a cold cache", "parallel test runs",
             "the release build", "daylight saving changes", "large inputs", "a flaky network"],
            ["the billing service", "auth middleware", "the ingest worker"],
        ),
        "edge": (
            ["{x} in {f} again??", "git says {x}, {f}", "{f}: {x} help"],
            ["segfault", "merge conflict", "detached HEAD", "npm ERR", "stack overflow",
             "undefined is not a function", "borrow checker error", "exit code 137", "SSL error"],
            ["main.rs", "index.js", "Dockerfile"],
        ),
    },
    "doc": {
        "simple": (
            ["Summarize the {x}.", "Proofread the {x}.", "Turn the {x} into bullet points."],
            ["quarterly report", "meeting minutes", "project proposal", "lease agreement",
             "research abstract", "onboarding guide", "press release", "policy memo", "user manual"],
        ),
        "complex": (
            ["Compare the {x} with last year's version and draft a one-page {y} for the board.",
             "Extract every deadline from the {x}, then write a {y} that cites each section.",
             "Rewrite the {x} for a non-technical audience and add a {y} at the top."],
            ["vendor contract", "grant application", "compliance handbook", "annual report",
             "architecture whitepaper", "insurance policy", "employee handbook", "audit findings",
             "product requirements document"],
            ["summary", "redline memo", "executive brief"],
        ),
        "edge": (
            ["{x} -> shorter", "tl;dr the {x}", "{x}, make it sound formal"],
            ["attached pdf", "this contract", "my essay draft", "the slides", "terms of service",
             "chapter 3", "the minutes", "cover letter", "the spec sheet"],
        ),
    },
}

STATE = {
    "chat": [("Picking up our chat from before about {x}: where were we?", True),
             ("Forget our earlier conversation; new topic: {x}.", False)],
    "task": [("Continue the reminder list we were building and add {x}.", True),
             ("Ignore the schedule we discussed before; just add {x} fresh.", False)],
    "dev": [("Back to the bug we were debugging earlier: now {x} fails too.", True),
            ("Start over, disregard the earlier stack trace: {x}.", False)],
    "doc": [("Keep going on the summary we started of the {x}.", True),
            ("Drop the previous draft; summarize the {x} from scratch.", False)],
}
STATE_FILL = {
    "chat": ["weekend plans", "the novel", "your favorite songs", "that trip", "cooking", "the match",
             "your hobbies", "old friends"],
    "task": ["the plumber call", "a pharmacy stop", "the insurance renewal", "a lunch booking",
             "the visa form", "the school pickup", "a bike repair", "the gym renewal"],
    "dev": ["the login test", "the migration script", "the cache layer", "the retry loop", "the CSV export",
            "the webhook handler", "the date parser", "the search index"],
    "doc": ["board minutes", "safety manual", "funding report", "style guide", "privacy notice",
            "travel policy", "release notes", "risk register"],
}


def expand(spec):
    templates, *slots = spec
    out = []
    for tpl in templates:
        names = [n for n in ("x", "y", "t", "f") if "{" + n + "}" in tpl]
        for values in itertools.product(*slots[: len(names)]):
            out.append(tpl.format(**dict(zip(names, values))))
    return sorted(set(out))


def main():
    rng = random.Random(SEED)
    prompts = []
    for route in ("chat", "task", "dev", "doc"):
        state_fills = rng.sample(STATE_FILL[route], sum(STATE_PER_ROUTE_STRATUM.values()))
        for stratum in ("simple", "complex", "edge"):
            n_state = STATE_PER_ROUTE_STRATUM.get(stratum, 0)
            texts = expand(T[route][stratum])
            if len(texts) < PER_CELL - n_state:
                sys.exit(f"{route}/{stratum}: only {len(texts)} texts")
            chosen = rng.sample(texts, PER_CELL - n_state)
            for text in chosen:
                prompts.append({"text": text, "ground_truth_route": route, "stratum": stratum,
                                "state_sensitive": False})
            fills, state_fills = state_fills[:n_state], state_fills[n_state:]
            for i, fill in enumerate(fills):
                tpl, memory = STATE[route][i % 2]
                prompts.append({"text": tpl.format(x=fill), "ground_truth_route": route, "stratum": stratum,
                                "state_sensitive": True,
                                "expected_state_behavior": {"route": route, "memory": memory}})
    rng.shuffle(prompts)
    assert len({p["text"] for p in prompts}) == len(prompts), "duplicate text"
    out = Path(__file__).resolve().parent.parent / "data" / "default_pool.jsonl"
    with out.open("w") as f:
        for i, p in enumerate(prompts, 1):
            row = {"id": f"p{i:03d}", **p}
            f.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"{len(prompts)} prompts -> {out}")


if __name__ == "__main__":
    main()
