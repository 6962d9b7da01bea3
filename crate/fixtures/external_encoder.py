"""Minimal encoder speaking the line-delimited JSON protocol, for tests."""
import json
import sys

DIM = 4

for line in sys.stdin:
    req = json.loads(line)
    op = req.get("op")
    if op == "info":
        out = {"dim": DIM}
    elif op == "tokenize":
        out = {"tokens": [len(w) for w in req["text"].split()]}
    elif op == "encode":
        toks = req["tokens"]
        n = max(len(toks), 1)
        out = {"features": [len(toks) / 10.0, sum(toks) / n, float(min(toks, default=0)), 1.0]}
    else:
        out = {"error": f"unknown op {op}"}
    sys.stdout.write(json.dumps(out) + "\n")
    sys.stdout.flush()
