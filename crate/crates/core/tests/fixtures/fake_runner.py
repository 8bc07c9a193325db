"""Minimal runner speaking the one-line protocol, for exec tests."""
import argparse
import json
import re
import subprocess
import sys

MARKER = re.compile(r"Objective Value:\s*(.*)")


def classify(out):
    # An empty error message marks a clean run without a usable objective.
    lines = [m.group(1).strip().strip("'\"") for m in map(MARKER.search, out.splitlines()) if m]
    if not lines:
        return "error", None, ""
    v = lines[-1]
    if v.lower() in ("infeasible", "unbounded"):
        return v.lower(), None, ""
    try:
        return "optimal", float(v), ""
    except ValueError:
        return "error", None, ""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--script", required=True)
    ap.add_argument("--timeout", type=float, required=True)
    a = ap.parse_args()
    try:
        p = subprocess.run([sys.executable, a.script], capture_output=True, text=True, timeout=a.timeout)
    except subprocess.TimeoutExpired as e:
        out = e.stdout.decode() if isinstance(e.stdout, bytes) else (e.stdout or "")
        rec = {"status": "timeout", "objective": None, "stdout": out, "error": "timed out"}
    else:
        if p.returncode != 0:
            rec = {"status": "error", "objective": None, "stdout": p.stdout, "error": p.stderr.strip().splitlines()[-1] if p.stderr.strip() else "exit %d" % p.returncode}
        else:
            status, obj, err = classify(p.stdout)
            rec = {"status": status, "objective": obj, "stdout": p.stdout, "error": err}
    sys.stdout.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main()
