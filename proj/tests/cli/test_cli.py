"""End-to-end checks of the synaug command line.

Usage: test_cli.py <path to synaug> <schema directory>
"""

import json
import os
import subprocess
import sys
import tempfile
import unittest

import jsonschema

BIN = None
SCHEMAS = None


def run(*args, check=True):
    proc = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True)
    if check and proc.returncode != 0:
        raise AssertionError(f"synaug {' '.join(map(str, args))} exited {proc.returncode}: {proc.stderr}")
    return proc


def schema(name):
    with open(os.path.join(SCHEMAS, name + ".schema.json")) as f:
        return json.load(f)


def data_rows(path):
    with open(path) as f:
        return [line for line in f if line.strip() and not line.startswith("#")]


class Cli(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp, name)

    def simulate(self, name, preset, n0, n1, seed=1):
        out = self.path(name)
        run("simulate", "--preset", preset, "--n0", n0, "--n1", n1, "--seed", seed, "--out", out)
        return out

    def test_usage_errors_exit_2(self):
        self.assertEqual(run(check=False).returncode, 2)
        self.assertEqual(run("simulate", check=False).returncode, 2)
        csv = self.simulate("d.csv", "two-gaussian-mu1-a05", 60, 12)
        self.assertEqual(run("tune", "--data", csv, "--grid", "0:x", check=False).returncode, 2)
        self.assertEqual(run("tune", "--data", csv, "--loss", "cubic", check=False).returncode, 2)

    def test_unknown_preset_lists_the_presets(self):
        proc = run("simulate", "--preset", "no-such-model", check=False)
        self.assertEqual(proc.returncode, 2)
        for name in ("fig2", "two-gaussian-mu1-a05", "mean-shift-d20-cube"):
            self.assertIn(name, proc.stderr)
        listing = run("presets").stdout
        self.assertIn("fig3", listing)

    def test_data_errors_exit_3(self):
        nolabel = self.path("nolabel.csv")
        with open(nolabel, "w") as f:
            f.write("x1,x2\n1,2\n3,4\n")
        empty = self.path("empty.csv")
        open(empty, "w").close()
        for bad in (nolabel, empty, self.path("missing.csv")):
            proc = run("tune", "--data", bad, check=False)
            self.assertEqual(proc.returncode, 3, proc.stderr)

    def test_numeric_errors_exit_4(self):
        sep = self.path("sep.csv")
        with open(sep, "w") as f:
            f.write("x1,label\n")
            for i in range(30):
                f.write(f"{-1 - 0.01 * i},0\n")
            for i in range(6):
                f.write(f"{1 + 0.01 * i},1\n")
        proc = run("diagnose", "--data", sep, "--loss", "logistic", "--ridge", "0", check=False)
        self.assertEqual(proc.returncode, 4, proc.stderr)
        self.assertIn("SeparableWithoutRidge", proc.stderr)

    def test_simulate_writes_the_requested_counts(self):
        csv = self.simulate("s.csv", "two-gaussian-mu1-a05", 40, 2)
        rows = data_rows(csv)
        self.assertEqual(rows[0].strip(), "x1,x2,label")
        self.assertEqual(len(rows), 43)
        labels = [int(r.strip().split(",")[-1]) for r in rows[1:]]
        self.assertEqual(labels.count(0), 40)
        self.assertEqual(labels.count(1), 2)

    def test_generate_round_trips_values(self):
        csv = self.simulate("g.csv", "two-gaussian-mu1-a05", 50, 10)
        aug = self.path("aug.csv")
        run("generate", "--data", csv, "--count", 7, "--augmented", "--out", aug)
        src = data_rows(csv)[1:]
        got = data_rows(aug)[1:]
        self.assertEqual(len(got), 67)
        for a, b in zip(src, got):
            for x, y in zip(a.strip().split(","), b.strip().split(",")):
                self.assertLessEqual(abs(float(x) - float(y)), 1e-15 * max(1.0, abs(float(x))))
        self.assertTrue(all(r.strip().endswith(",1") for r in got[60:]))

    def test_tune_grid_schema_and_determinism(self):
        csv = self.simulate("t.csv", "two-gaussian-mu1-a05", 200, 20)
        a = run("tune", "--data", csv, "--grid", "0:2:21", "--seed", 7).stdout
        b = run("tune", "--data", csv, "--grid", "0:2:21", "--seed", 7).stdout
        self.assertEqual(a, b)
        doc = json.loads(a)
        jsonschema.validate(doc, schema("vtss_result"))
        self.assertEqual(len(doc["cv_curve"]), 21)
        self.assertIn(doc["gamma_star"], [c["gamma"] for c in doc["cv_curve"]])
        self.assertEqual(doc["n_syn_star"], round(doc["gamma_star"] * 180))
        audited = json.loads(run("tune", "--data", csv, "--grid", "0,1", "--audit").stdout)
        jsonschema.validate(audited, schema("vtss_result"))
        self.assertEqual(len(audited["audit"]), 5)

    def test_diagnose_mean_shift_reports_local_symmetry(self):
        # The 3 SE band is calibrated for large samples; smaller ones can land
        # in the inconclusive zone.
        csv = self.simulate("ms.csv", "mean-shift-d20-cube", 100000, 100000)
        doc = json.loads(
            run("diagnose", "--data", csv, "--generator", "gaussian_fit", "--loss", "squared", "--target", "centered",
                "--step-rule", "closed_form", "--target-n0", 2000, "--target-n1", 100).stdout)
        jsonschema.validate(doc, schema("diagnose"))
        self.assertEqual(doc["regime"], "local_symmetry")
        self.assertIn("γ*≈0", doc["recommendation"])

    def test_diagnose_two_gaussian_multiplier(self):
        csv = self.simulate("tg.csv", "two-gaussian-mu1-a05", 100000, 100000)
        doc = json.loads(
            run("diagnose", "--data", csv, "--loss", "squared", "--step-rule", "closed_form", "--generator",
                "model_synthetic", "--model", "two-gaussian-mu1-a05", "--target-n0", 2000, "--target-n1", 100).stdout)
        jsonschema.validate(doc, schema("diagnose"))
        self.assertEqual(doc["regime"], "local_asymmetry")
        self.assertGreaterEqual(doc["bias_canceling"]["multiplier"], 3.5)
        self.assertLessEqual(doc["bias_canceling"]["multiplier"], 4.5)

    def test_experiment_outputs_and_schemas(self):
        out = self.path("fig2-out")
        run("experiment", "--preset", "fig2", "--reps", 2, "--out", out)
        for name in ("raw.csv", "summary.csv", "failures.csv", "config.json"):
            self.assertTrue(os.path.exists(os.path.join(out, name)), name)
        with open(os.path.join(out, "config.json")) as f:
            config = json.load(f)
        jsonschema.validate(config, schema("experiment_config"))
        # The written config replays to identical raw values.
        replay = self.path("replay")
        run("experiment", "--config", os.path.join(out, "config.json"), "--out", replay)
        self.assertEqual(data_rows(os.path.join(out, "raw.csv")), data_rows(os.path.join(replay, "raw.csv")))

    def test_shipped_presets_match_their_schemas(self):
        presets = os.path.join(os.path.dirname(SCHEMAS), "presets")
        for name in sorted(os.listdir(presets)):
            with open(os.path.join(presets, name)) as f:
                doc = json.load(f)
            kind = "model_preset" if doc["type"] == "model" else "experiment_config"
            jsonschema.validate(doc, schema(kind))


if __name__ == "__main__":
    BIN, SCHEMAS = sys.argv[1], sys.argv[2]
    unittest.main(argv=sys.argv[:1], verbosity=2)
