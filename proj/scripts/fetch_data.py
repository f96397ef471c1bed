#!/usr/bin/env python3
# Copyright 2026 The SMMD Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Rebuilds data/ from UCI copies redistributed inside PyPI wheels.

  census/adult.csv        UCI Adult (Census-Income), from the `responsibly` wheel.
  credit/uci_credit_subset.csv
                          6,000-row, 4-feature extract of UCI default-of-credit-card
                          clients, from the `skorecard` wheel.

The full 30,000 x 23 Credit-Card table is not redistributed on PyPI. Drop the
standard Kaggle/UCI export (UCI_Credit_Card.csv) at data/credit/UCI_Credit_Card.csv
and the harness picks it up instead of the subset.
"""
import csv
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data"
ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country", "income",
]


def wheel(name, version, tmp):
    subprocess.run([sys.executable, "-m", "pip", "download", f"{name}=={version}",
                    "--no-deps", "-q", "-d", tmp], check=True)
    return next(pathlib.Path(tmp).glob(f"{name}-*.whl"))


def main():
    with tempfile.TemporaryDirectory() as tmp:
        z = zipfile.ZipFile(wheel("responsibly", "0.1.2", tmp))
        raw = z.read("responsibly/dataset/adult/adult.data").decode()
        (ROOT / "census").mkdir(parents=True, exist_ok=True)
        with open(ROOT / "census" / "adult.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(ADULT_COLUMNS)
            for row in csv.reader(io.StringIO(raw)):
                if len(row) != len(ADULT_COLUMNS):
                    continue
                w.writerow([c.strip() for c in row])

        z = zipfile.ZipFile(wheel("skorecard", "1.6.9", tmp))
        inner = zipfile.ZipFile(io.BytesIO(z.read("skorecard/data/UCI_Credit_Card.zip")))
        (ROOT / "credit").mkdir(parents=True, exist_ok=True)
        (ROOT / "credit" / "uci_credit_subset.csv").write_bytes(
            inner.read("UCI_Credit_Card.csv").replace(b"\r\n", b"\n"))


if __name__ == "__main__":
    main()
