"""Validates CLI JSON output against the shipped schemas and checks byte-stable re-emission."""

import json
import random
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

LOT = Path(sys.argv[1])
SCHEMA = Path(sys.argv[2])
failures = 0


def check(cond, what):
    global failures
    print(("ok   " if cond else "FAIL ") + what)
    failures += not cond


def reemit(path):
    text = path.read_text()
    return json.dumps(json.loads(text), indent=2, ensure_ascii=False) + "\n" == text


def run(args):
    r = subprocess.run([str(LOT), *args], capture_output=True, text=True)
    if r.returncode != 0:
        print(r.stderr)
    return r.returncode


def write_cloud(path, rows):
    path.write_text("".join(",".join(repr(v) for v in row) + "\n" for row in rows))


solve_schema = json.loads((SCHEMA / "solve_result.schema.json").read_text())
summary_schema = json.loads((SCHEMA / "experiment_summary.schema.json").read_text())
jsonschema.Draft202012Validator.check_schema(solve_schema)
jsonschema.Draft202012Validator.check_schema(summary_schema)

rng = random.Random(3)
with tempfile.TemporaryDirectory() as tmp:
    d = Path(tmp)
    cloud = lambda n, shift: [[rng.gauss(shift * (i % 3), 1.0) for _ in range(4)] for i in range(n)]
    write_cloud(d / "x.csv", cloud(30, 4.0))
    write_cloud(d / "y.csv", cloud(25, -4.0))

    for variant in ["l2", "wa", "unbalanced", "transform", "fc"]:
        out = d / f"{variant}.json"
        code = run(["solve", "--source", str(d / "x.csv"), "--target", str(d / "y.csv"), "--kx", "3", "--ky", "3",
                    "--epsilon", "5", "--variant", variant, "--out", str(out)])
        check(code in (0, 2), f"solve {variant} exit {code}")
        doc = json.loads(out.read_text())
        try:
            jsonschema.validate(doc, solve_schema)
            check(True, f"solve {variant} validates")
        except jsonschema.ValidationError as e:
            check(False, f"solve {variant} validates: {e.message}")
        check(reemit(out), f"solve {variant} re-emits byte-stable")

    write_cloud(d / "big_x.csv", [[rng.random()] for _ in range(500001)])
    write_cloud(d / "big_y.csv", [[0.1], [0.5], [0.9]])
    out = d / "big.json"
    check(run(["solve", "--source", str(d / "big_x.csv"), "--target", str(d / "big_y.csv"), "--kx", "2", "--ky", "2",
               "--epsilon", "1", "--max-iter", "50", "--out", str(out)]) == 0, "large solve exit 0")
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, solve_schema)
    px = doc["plans"]["px"]
    check(isinstance(px, dict) and (d / px["binary"]).exists(), "large plan goes to a sidecar file")
    check((d / px["binary"]).stat().st_size == 16 + 8 * px["rows"] * px["cols"], "sidecar size matches header")
    check(reemit(out), "large solve re-emits byte-stable")

    configs = {
        "gmm_sweep": {"sweep": "outlier_rate", "values": [0.0, 0.2]},
        "sampling": {"values": [10, 20], "data": {"sampling_pool": 200}},
        "cluster_correlation": {"values": [0, 1]},
        "hypercube": {"data": {"n": 40}},
        "annulus": {"data": {"n": 40}},
    }
    for name, extra in configs.items():
        cfg = {"experiment": name, "repetitions": 2, "data": {"points_per_component": 10}}
        for k, v in extra.items():
            cfg[k] = {**cfg[k], **v} if isinstance(v, dict) and k in cfg else v
        (d / f"{name}.cfg.json").write_text(json.dumps(cfg))
        prefix = d / name
        check(run(["experiment", "--config", str(d / f"{name}.cfg.json"), "--out", str(prefix)]) == 0,
              f"experiment {name} exit 0")
        out = Path(str(prefix) + ".summary.json")
        try:
            jsonschema.validate(json.loads(out.read_text()), summary_schema)
            check(True, f"experiment {name} validates")
        except jsonschema.ValidationError as e:
            check(False, f"experiment {name} validates: {e.message}")
        check(reemit(out), f"experiment {name} re-emits byte-stable")

sys.exit(1 if failures else 0)
