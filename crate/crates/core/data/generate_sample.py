#!/usr/bin/env python3
"""Regenerates sample50.jsonl, a small labelled corpus of Java/C# conflicts.

Each record is built from a common merge scenario (import unions, competing
edits of one statement, methods added on both sides, overlapping field
blocks, partial picks, one-sided deletions). Resolutions only use lines from
the two versions. Output is deterministic for a given seed.
"""

import json
import random
import sys

PROJECTS = ["inventory-service", "ledger-core", "mapdb-lite", "route-planner", "chat-gateway"]
PACKAGES = ["java.util", "java.io", "java.time", "java.util.concurrent", "java.nio.file",
            "org.slf4j", "com.google.common.collect", "org.junit.jupiter.api"]
CLASSES = ["List", "Map", "HashMap", "ArrayList", "Optional", "Duration", "Instant", "Path",
           "Files", "Logger", "LoggerFactory", "ImmutableList", "Test", "Assertions",
           "ConcurrentHashMap", "Executors", "IOException", "Objects", "Collections", "Set"]
NAMES = ["count", "orderId", "userName", "timeout", "retries", "buffer", "cache", "limit",
         "offset", "payload", "session", "region", "balance", "entry", "handler"]
TYPES = ["int", "long", "String", "boolean", "Duration", "List<String>", "Map<String, Long>"]
CALLS = ["validate", "refresh", "flush", "notifyListeners", "recordMetric", "close",
         "ensureCapacity", "reset", "checkState", "publish"]


def imports(rng, n):
    lines = set()
    while len(lines) < n:
        lines.add(f"import {rng.choice(PACKAGES)}.{rng.choice(CLASSES)};")
    return sorted(lines)


def statement(rng, indent="        "):
    kind = rng.randrange(5)
    a, b = rng.sample(NAMES, 2)
    if kind == 0:
        return f"{indent}{a} = {rng.choice(CALLS)}({b});"
    if kind == 1:
        return f"{indent}this.{a} = Objects.requireNonNull({b});"
    if kind == 2:
        return f"{indent}log.debug(\"{a} changed to {{}}\", {b});"
    if kind == 3:
        return f"{indent}if ({a} > {rng.randint(0, 64)}) {{ {rng.choice(CALLS)}(); }}"
    return f"{indent}{rng.choice(CALLS)}({a}, {b});"


def field(rng):
    return f"    private {rng.choice(TYPES)} {rng.choice(NAMES)}{rng.randint(1, 9)};"


def method(rng):
    name = rng.choice(CALLS) + rng.choice(["", "All", "Async", "Now", "IfNeeded"])
    body = [statement(rng) for _ in range(rng.randint(1, 3))]
    return ["", f"    public void {name}() {{", *body, "    }"]


def scenario_imports(rng):
    common = imports(rng, rng.randint(0, 2))
    extra = [l for l in imports(rng, 6) if l not in common]
    half = rng.randint(1, len(extra) - 1)
    v1 = sorted(common + extra[:half])
    v2 = sorted(common + extra[half:])
    return v1, v2, sorted(set(v1) | set(v2))


def scenario_edit(rng, keep):
    ctx = [statement(rng) for _ in range(rng.randint(0, 2))]
    v1 = ctx + [statement(rng)]
    v2 = ctx + [statement(rng)]
    if rng.random() < 0.5:
        tail = statement(rng)
        v1, v2 = v1 + [tail], v2 + [tail]
    return v1, v2, list(v1 if keep == 1 else v2)


def scenario_rewrite(rng, keep):
    v1 = [statement(rng) for _ in range(rng.randint(1, 4))]
    v2 = [statement(rng) for _ in range(rng.randint(1, 4))]
    return v1, v2, list(v1 if keep == 1 else v2)


def scenario_concat(rng):
    v1, v2 = method(rng), method(rng)
    return v1, v2, v1 + v2 if rng.random() < 0.7 else v2 + v1


def scenario_fields(rng):
    shared = [field(rng) for _ in range(rng.randint(1, 3))]
    a, b = field(rng), field(rng)
    v1 = shared + [a]
    v2 = shared[:1] + [b] + shared[1:]
    return v1, v2, shared[:1] + [b] + shared[1:] + [a]


def scenario_pick(rng):
    v1 = [statement(rng) for _ in range(rng.randint(2, 4))]
    v2 = [statement(rng) for _ in range(rng.randint(2, 4))]
    res = [v1[0]] + v2[1:]
    return v1, v2, res


def scenario_delete(rng):
    kept = method(rng)
    if rng.random() < 0.5:
        return [], kept, kept
    return kept, [], []


def build(seed, count):
    rng = random.Random(seed)
    plan = (["imports"] * 9 + ["edit1"] * 8 + ["edit2"] * 6 + ["rewrite1"] * 4 + ["rewrite2"] * 4
            + ["concat"] * 8 + ["fields"] * 5 + ["pick"] * 3 + ["delete"] * 3)
    assert len(plan) == count
    rng.shuffle(plan)
    records = []
    for i, kind in enumerate(plan):
        if kind == "imports":
            v1, v2, res = scenario_imports(rng)
        elif kind.startswith("edit"):
            v1, v2, res = scenario_edit(rng, int(kind[-1]))
        elif kind.startswith("rewrite"):
            v1, v2, res = scenario_rewrite(rng, int(kind[-1]))
        elif kind == "concat":
            v1, v2, res = scenario_concat(rng)
        elif kind == "fields":
            v1, v2, res = scenario_fields(rng)
        elif kind == "pick":
            v1, v2, res = scenario_pick(rng)
        else:
            v1, v2, res = scenario_delete(rng)
        cs = rng.random() < 0.3
        project = rng.choice(PROJECTS)
        path = f"src/main/{'cs' if cs else 'java'}/{project.replace('-', '/')}/{kind.capitalize()}{i}.{'cs' if cs else 'java'}"
        records.append({
            "id": f"{project}-{i:03d}",
            "project": project,
            "commit": "%040x" % rng.getrandbits(160),
            "path": path,
            "language": "CSharp" if cs else "Java",
            "base": None,
            "v1": v1,
            "v2": v2,
            "resolution": res,
        })
    return records


if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 20240611
    for r in build(seed, 50):
        print(json.dumps(r, ensure_ascii=False))
