# Copyright 2026 The comae-cpp Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""End-to-end checks of the comae command line tool."""

import csv
import hashlib
import json
import os
import subprocess
import sys
import tempfile
import unittest

import jsonschema

BINARY = sys.argv.pop(1)
SOURCE = sys.argv.pop(1)
SPEC = os.path.join(SOURCE, "data", "specs", "planted_mix.json")
SCHEMA = os.path.join(SOURCE, "docs", "eval_report.schema.json")
SMALL = ["--d-model", "8", "--layers", "1", "--heads", "2", "--lr", "0.005",
         "--warmup", "10"]


def digest(path):
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = cls.tmp.name
        cls.train = cls.path("train.jsonl")
        cls.test = cls.path("test.jsonl")
        cls.ok("synth", "--spec", SPEC, "--n", "150", "--seed", "1", "--out", cls.train)
        cls.ok("synth", "--spec", SPEC, "--n", "30", "--seed", "2", "--out", cls.test)
        cls.flat = cls.path("flat.ckpt")
        cls.hier = cls.path("hier.ckpt")
        for variant, out in (("cm||da||em", cls.flat), ("cm->da->em", cls.hier)):
            cls.ok("train", "--corpus", cls.train, "--variant", variant, "--epochs",
                   "2", "--seed", "3", "--out", out, *SMALL)
        cls.classifiers = cls.path("classifiers")
        cls.ok("train-classifier", "--corpus", cls.train, "--epochs", "1",
               "--out", cls.classifiers, *SMALL)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    @classmethod
    def path(cls, name):
        return os.path.join(cls.dir, name)

    @staticmethod
    def call(*args):
        return subprocess.run([BINARY, *args], capture_output=True, text=True)

    @classmethod
    def ok(cls, *args):
        r = cls.call(*args)
        if r.returncode != 0:
            raise AssertionError(f"{args[0]} failed ({r.returncode}): {r.stderr}")
        return r

    def test_synth_rejects_zero_and_is_reproducible(self):
        out = self.path("zero.jsonl")
        r = self.call("synth", "--spec", SPEC, "--n", "0", "--out", out)
        self.assertEqual(r.returncode, 1)
        self.assertIn("n must be >= 1", r.stderr)
        self.assertFalse(os.path.exists(out))
        again = self.path("again.jsonl")
        self.ok("synth", "--spec", SPEC, "--n", "150", "--seed", "1", "--out", again)
        self.assertEqual(digest(again), digest(self.train))

    def test_synth_validates_spec_before_writing(self):
        with open(SPEC) as f:
            spec = json.load(f)
        del spec["templates"]["encouraging|approval"]
        bad = self.path("bad_spec.json")
        with open(bad, "w") as f:
            json.dump(spec, f)
        out = self.path("bad.jsonl")
        r = self.call("synth", "--spec", bad, "--n", "5", "--out", out)
        self.assertEqual(r.returncode, 2)
        self.assertIn("encouraging|approval", r.stderr)
        self.assertFalse(os.path.exists(out))

    def test_stats_rows_are_distributions(self):
        out = self.path("stats")
        self.ok("stats", "--corpus", self.train, "--out", out)
        for name in ("da_given_cm", "em_given_cm", "em_given_da"):
            self.assertTrue(os.path.exists(os.path.join(out, name + ".svg")))
            with open(os.path.join(out, name + ".csv")) as f:
                rows = list(csv.reader(f))[1:]
            for row in rows:
                values = [float(v) for v in row[1:] if v != ""]
                if values:
                    self.assertAlmostEqual(sum(values), 1.0, delta=1e-9)
        self.assertTrue(os.path.exists(os.path.join(out, "manifest.json")))

    def test_config_file_is_overridden_by_flags(self):
        config = self.path("run.cfg")
        with open(config, "w") as f:
            f.write("# small run\nepochs = 3\nbatch_size = 8\nd_model = 8\nlayers = 1\n")
        out = self.path("cfg.ckpt")
        self.ok("train", "--corpus", self.train, "--variant", "vanilla", "--config",
                config, "--epochs", "1", "--out", out)
        with open(out + ".manifest.json") as f:
            manifest = json.load(f)
        self.assertIn("epochs=1\n", manifest["config"])
        self.assertIn("batch_size=8\n", manifest["config"])
        self.assertEqual([o["path"] for o in manifest["outputs"]],
                         [out, out + ".metrics.csv"])
        with open(config, "a") as f:
            f.write("no_such_key = 1\n")
        r = self.call("train", "--corpus", self.train, "--variant", "vanilla",
                      "--config", config, "--out", self.path("x.ckpt"))
        self.assertEqual(r.returncode, 1)

    def test_unknown_variant_lists_valid_names(self):
        r = self.call("train", "--corpus", self.train, "--variant", "cm=>da",
                      "--out", self.path("v.ckpt"))
        self.assertEqual(r.returncode, 1)
        self.assertIn("cm->da->em", r.stderr)

    def test_generate_modes(self):
        gt = self.path("gt.jsonl")
        self.ok("generate", "--checkpoint", self.hier, "--corpus", self.test,
                "--mode", "ground_truth", "--max-new-tokens", "12", "--out", gt)
        with open(gt) as f:
            lines = [json.loads(l) for l in f]
        self.assertEqual(len(lines), 30)
        for line in lines:
            self.assertEqual(line["factors"], line["reference"]["factors"])
            self.assertNotIn("stages", line)
        pred = self.path("pred.jsonl")
        self.ok("generate", "--checkpoint", self.hier, "--corpus", self.test,
                "--mode", "predicted", "--max-new-tokens", "12", "--out", pred)
        with open(pred) as f:
            line = json.loads(f.readline())
        self.assertEqual(set(line["stages"]), {"cm", "da", "em"})
        self.assertEqual(len(line["stages"]["da"]), 9)
        self.assertEqual(len(line["stages"]["em"]), 10)
        r = self.call("generate", "--checkpoint", self.path("missing.ckpt"),
                      "--corpus", self.test, "--out", self.path("m.jsonl"))
        self.assertEqual(r.returncode, 2)

    def test_evaluate_report_validates_and_pairs_models(self):
        out = self.path("report.json")
        self.ok("evaluate", "--checkpoint", self.flat, "--checkpoint", self.hier,
                "--corpus", self.test, "--classifiers", self.classifiers,
                "--max-new-tokens", "12", "--seed", "7", "--out", out)
        with open(out) as f:
            report = json.load(f)
        with open(SCHEMA) as f:
            jsonschema.validate(report, json.load(f))
        self.assertEqual([m["model_id"] for m in report["metrics"]], ["flat", "hier"])
        for h in report["hits"]:
            self.assertEqual((h["flat_model"], h["hierarchical_model"]), ("flat", "hier"))
        self.assertEqual(len(report["realization"]), 2)
        with open(self.path("report.csv")) as f:
            header = next(csv.reader(f))
        self.assertEqual(header, ["model_id", "split", "metric", "value"])

    def test_evaluate_realization_needs_classifiers(self):
        r = self.call("evaluate", "--checkpoint", self.hier, "--corpus", self.test,
                      "--realization", "--out", self.path("r.json"))
        self.assertEqual(r.returncode, 1)
        empty = self.path("empty_classifiers")
        os.makedirs(empty, exist_ok=True)
        r = self.call("evaluate", "--checkpoint", self.hier, "--corpus", self.test,
                      "--classifiers", empty, "--out", self.path("r.json"))
        self.assertEqual(r.returncode, 1)
        self.assertIn("missing classifier", r.stderr)


if __name__ == "__main__":
    unittest.main()
