#!/usr/bin/env python3
# Copyright 2026 The isoprobe Authors. All Rights Reserved.
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
# ==============================================================================
"""Command-line behaviour: exit codes, a full smoke run, report schema."""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import unittest

import jsonschema

ARGS = None
COMMANDS = ["synth", "train", "embed", "analyze", "verify", "eval", "report"]


def run(*argv, env=None):
    full_env = dict(os.environ)
    full_env.pop("ISOPROBE_WORKERS", None)
    full_env.update(env or {})
    return subprocess.run([ARGS.cli, *argv], capture_output=True, text=True, env=full_env)


class ExitCodes(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory(prefix="isoprobe_cli_")
        self.out = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def test_version(self):
        r = run("--version")
        self.assertEqual(r.returncode, 0)
        self.assertEqual(r.stdout.strip(), "0.1.0")

    def test_usage_errors_exit_2(self):
        self.assertEqual(run().returncode, 2)
        self.assertEqual(run("train", "--bogus").returncode, 2)
        self.assertEqual(run("synth", "--config", "/nonexistent.conf").returncode, 2)
        self.assertEqual(run("synth", "--workers", "0", "--out", self.out).returncode, 2)
        self.assertEqual(run("synth", "--seed", "abc", "--out", self.out).returncode, 2)

    def test_config_errors_exit_2(self):
        r = run("synth", "--out", self.out, "--set", "bogus.key=1")
        self.assertEqual(r.returncode, 2)
        self.assertIn("bogus.key", r.stderr)
        bad = os.path.join(self.out, "bad.conf")
        with open(bad, "w") as f:
            f.write("[synth]\nlength = \"long\"\n")
        self.assertEqual(run("synth", "--config", bad, "--out", self.out).returncode, 2)
        r = run("synth", "--out", self.out, env={"ISOPROBE_WORKERS": "many"})
        self.assertEqual(r.returncode, 2)

    def test_missing_input_exit_3(self):
        for cmd in COMMANDS[1:]:
            r = run(cmd, "--out", self.out)
            self.assertEqual(r.returncode, 3, cmd)
            self.assertIn("missing", r.stderr)


class SmokeRun(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory(prefix="isoprobe_smoke_")
        cls.out = cls.tmp.name
        cls.codes = {}
        for cmd in COMMANDS:
            r = run(cmd, "--config", ARGS.config, "--out", cls.out, "--quiet")
            cls.codes[cmd] = (r.returncode, r.stderr)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_every_command_succeeds(self):
        for cmd, (code, err) in self.codes.items():
            self.assertEqual(code, 0, f"{cmd}: {err}")

    def test_report_matches_schema(self):
        with open(ARGS.schema) as f:
            schema = json.load(f)
        with open(os.path.join(self.out, "report", "report.json")) as f:
            report = json.load(f)
        jsonschema.Draft202012Validator.check_schema(schema)
        jsonschema.validate(report, schema, cls=jsonschema.Draft202012Validator)
        self.assertEqual(len(report["runs"]), 1)

    def test_manifests_list_hashed_outputs(self):
        for cmd in COMMANDS:
            with open(os.path.join(self.out, cmd, "manifest.json")) as f:
                m = json.load(f)
            self.assertEqual(m["command"], cmd)
            self.assertTrue(m["outputs"], cmd)
            for entry in m["outputs"]:
                self.assertRegex(entry["sha256"], "^[0-9a-f]{64}$")
                self.assertTrue(os.path.exists(os.path.join(self.out, entry["path"])))

    def test_plot_csv_headers(self):
        with open(os.path.join(self.out, "analyze", "pca_plot.csv")) as f:
            self.assertEqual(f.readline().strip(), "layer,pc1,pc2,pc3,cluster_id,token_id")
        for name in ("sweep_context_length.csv", "sweep_noise.csv"):
            with open(os.path.join(self.out, "eval", name)) as f:
                self.assertEqual(f.readline().strip(),
                                 "sweep_var,value,dataset,seed,nmse,zeta_prime,d08,iso_I")

    def test_stale_input_exit_3(self):
        with tempfile.TemporaryDirectory(prefix="isoprobe_stale_") as out:
            self.assertEqual(run("synth", "--config", ARGS.config, "--out", out, "-q").returncode, 0)
            with open(os.path.join(out, "synth", "trend1.csv"), "a") as f:
                f.write("128,0\n")
            r = run("train", "--config", ARGS.config, "--out", out, "-q")
            self.assertEqual(r.returncode, 3)
            self.assertIn("stale", r.stderr)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--cli", required=True)
    parser.add_argument("--config", required=True)
    parser.add_argument("--schema", required=True)
    ARGS, rest = parser.parse_known_args()
    unittest.main(argv=[sys.argv[0], *rest], verbosity=2)
