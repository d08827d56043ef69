"""German credit data pipeline: parsing, encoding, and a synthetic stand-in.

The expected input is the UCI Statlog "German credit" plain-text format
(``german.data``): 1000 whitespace-separated records, 21 fields each,
where the first 20 fields are attribute values (13 categorical codes,
7 nonnegative integers) and the last is the outcome code, 1 for
creditworthy and 2 for not.  The file is available from the UCI Machine
Learning Repository under ``statlog+german+credit+data``; it is not
bundled here.  A deterministic synthetic sample with the same layout,
marginals, and outcome split ships in its place so that every command
runs out of the box.

Encoding is dummy coding: each categorical attribute contributes one
indicator column per non-reference code (the reference is the first
code in the UCI codebook), each numeric attribute passes through, and
no intercept column is added, for 42 + 7 = 49 columns.  The codebook's
purpose attribute nominally lists a vacation code A47, which its own
documentation marks as nonexistent and which never occurs in the data;
it is excluded from the code set.  The personal-status code A95 also
never occurs, but the codebook documents it without reservation, so it
keeps a column (all zeros on faithful data).
"""

from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .logit_model import Dataset

ENV_DATA_PATH = "PGGAP_GERMAN_DATA"

# (name, codes) per attribute in file order; codes None means numeric.
# The first code of each categorical set is the dummy-coding reference.
CODEBOOK = (
    ("checking_status", ("A11", "A12", "A13", "A14")),
    ("duration_months", None),
    ("credit_history", ("A30", "A31", "A32", "A33", "A34")),
    (
        "purpose",
        ("A40", "A41", "A42", "A43", "A44", "A45", "A46", "A48", "A49", "A410"),
    ),
    ("credit_amount", None),
    ("savings_account", ("A61", "A62", "A63", "A64", "A65")),
    ("employment_since", ("A71", "A72", "A73", "A74", "A75")),
    ("installment_rate", None),
    ("personal_status", ("A91", "A92", "A93", "A94", "A95")),
    ("other_debtors", ("A101", "A102", "A103")),
    ("residence_since", None),
    ("property", ("A121", "A122", "A123", "A124")),
    ("age_years", None),
    ("other_installments", ("A141", "A142", "A143")),
    ("housing", ("A151", "A152", "A153")),
    ("existing_credits", None),
    ("job", ("A171", "A172", "A173", "A174")),
    ("people_liable", None),
    ("telephone", ("A191", "A192")),
    ("foreign_worker", ("A201", "A202")),
)

N_ATTRIBUTES = len(CODEBOOK)
N_FIELDS = N_ATTRIBUTES + 1


@dataclass(frozen=True)
class RawCreditRecord:
    """One loan application: 20 attribute values plus the outcome code."""

    values: tuple
    outcome: int

    def __post_init__(self):
        if len(self.values) != N_ATTRIBUTES:
            raise ValueError(
                "expected %d attribute values, got %d"
                % (N_ATTRIBUTES, len(self.values))
            )
        if self.outcome not in (1, 2):
            raise ValueError("outcome code must be 1 or 2")
        for (name, codes), value in zip(CODEBOOK, self.values):
            if codes is None:
                if not isinstance(value, int) or value < 0:
                    raise ValueError(
                        "%s must be a nonnegative integer, got %r" % (name, value)
                    )
            elif value not in codes:
                raise ValueError("%s has unknown code %r" % (name, value))


@dataclass(frozen=True)
class EncodingSpec:
    """Column layout for the design matrix.

    ``attributes`` lists (name, codes-or-None) in column order; each
    categorical attribute emits one indicator per non-reference code
    and each numeric attribute one column.  ``standardize`` centers and
    scales the numeric columns by their sample moments.
    """

    attributes: tuple = CODEBOOK
    standardize: bool = False

    @property
    def column_names(self):
        names = []
        for name, codes in self.attributes:
            if codes is None:
                names.append(name)
            else:
                names.extend("%s_%s" % (name, code) for code in codes[1:])
        return names

    @property
    def n_columns(self):
        return len(self.column_names)


def default_encoding() -> EncodingSpec:
    spec = EncodingSpec()
    if spec.n_columns != 49:
        raise AssertionError("codebook encoding must span 49 columns")
    return spec


def parse_german_data(source, expected_records=1000):
    """Parse UCI german.data text into records.

    ``source`` may be a string, bytes, a file-like object, or an
    iterable of lines.  Each non-blank line must carry 21 whitespace
    separated fields.  Malformed lines raise with their line number;
    a record count different from ``expected_records`` (pass None to
    skip the check) or empty input raises as well.
    """
    if isinstance(source, bytes):
        source = source.decode("ascii")
    if isinstance(source, str):
        source = io.StringIO(source)
    records = []
    for lineno, line in enumerate(source, start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != N_FIELDS:
            raise ValueError(
                "line %d: expected %d fields, got %d"
                % (lineno, N_FIELDS, len(fields))
            )
        values = []
        for (name, codes), field in zip(CODEBOOK, fields):
            if codes is None:
                try:
                    values.append(int(field))
                except ValueError:
                    raise ValueError(
                        "line %d: %s must be an integer, got %r"
                        % (lineno, name, field)
                    ) from None
            else:
                values.append(field)
        try:
            outcome = int(fields[-1])
        except ValueError:
            raise ValueError(
                "line %d: outcome must be an integer, got %r"
                % (lineno, fields[-1])
            ) from None
        try:
            records.append(RawCreditRecord(values=tuple(values), outcome=outcome))
        except ValueError as exc:
            raise ValueError("line %d: %s" % (lineno, exc)) from None
    if not records:
        raise ValueError("no records found in input")
    if expected_records is not None and len(records) != expected_records:
        raise ValueError(
            "expected %d records, got %d" % (expected_records, len(records))
        )
    return records


def encode(records, spec: EncodingSpec | None = None) -> Dataset:
    """Design matrix and response from parsed records.

    y is 1 for outcome code 1 (creditworthy) and 0 otherwise.  A
    categorical code outside the encoding's code set raises.
    """
    if spec is None:
        spec = default_encoding()
    n = len(records)
    X = np.zeros((n, spec.n_columns))
    y = np.zeros(n, dtype=int)
    for i, rec in enumerate(records):
        row = dict(zip((name for name, _ in CODEBOOK), rec.values))
        col = 0
        for name, codes in spec.attributes:
            value = row[name]
            if codes is None:
                X[i, col] = float(value)
                col += 1
            else:
                if value not in codes:
                    raise ValueError(
                        "record %d: %s code %r not in the encoding"
                        % (i + 1, name, value)
                    )
                k = codes.index(value)
                if k > 0:
                    X[i, col + k - 1] = 1.0
                col += len(codes) - 1
        y[i] = 1 if rec.outcome == 1 else 0
    if spec.standardize:
        col = 0
        for name, codes in spec.attributes:
            if codes is None:
                mu = X[:, col].mean()
                sd = X[:, col].std(ddof=1)
                X[:, col] = (X[:, col] - mu) / (sd if sd > 0 else 1.0)
                col += 1
            else:
                col += len(codes) - 1
    return Dataset(X=X, y=y)


def decode_row(x_row, spec: EncodingSpec | None = None):
    """Recover attribute values from one unstandardized design row.

    Indicator blocks map back to their categorical codes (all-zero
    block means the reference code); numeric columns pass through.
    Returns a name-to-value dict.
    """
    if spec is None:
        spec = default_encoding()
    if spec.standardize:
        raise ValueError("standardized rows cannot be decoded")
    x_row = np.asarray(x_row, dtype=float)
    if x_row.shape != (spec.n_columns,):
        raise ValueError("row length does not match the encoding")
    out = {}
    col = 0
    for name, codes in spec.attributes:
        if codes is None:
            out[name] = int(round(x_row[col]))
            col += 1
        else:
            block = x_row[col:col + len(codes) - 1]
            hot = np.nonzero(block != 0.0)[0]
            if hot.size == 0:
                out[name] = codes[0]
            elif hot.size == 1 and block[hot[0]] == 1.0:
                out[name] = codes[hot[0] + 1]
            else:
                raise ValueError("%s block is not a valid indicator" % name)
            col += len(codes) - 1
    return out


def design_hash(data: Dataset) -> str:
    """Deterministic fingerprint of an encoded dataset."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(data.X).tobytes())
    digest.update(np.ascontiguousarray(data.y).tobytes())
    return digest.hexdigest()


# Approximate marginals for the synthetic sample, shaped after the real
# data's published summary statistics.
_CATEGORICAL_WEIGHTS = {
    "checking_status": (274, 269, 63, 394),
    "credit_history": (40, 49, 530, 88, 293),
    "purpose": (234, 103, 181, 280, 12, 22, 50, 9, 97, 12),
    "savings_account": (603, 103, 63, 48, 183),
    "employment_since": (62, 172, 339, 174, 253),
    "personal_status": (50, 310, 548, 92, 0),
    "other_debtors": (907, 41, 52),
    "property": (282, 232, 332, 154),
    "other_installments": (139, 47, 814),
    "housing": (179, 713, 108),
    "job": (22, 200, 630, 148),
    "telephone": (596, 404),
    "foreign_worker": (963, 37),
}


def _synthetic_numeric(name, rng, n):
    if name == "duration_months":
        v = np.exp(rng.normal(2.9, 0.55, n))
        return np.clip(np.round(v), 4, 72).astype(int)
    if name == "credit_amount":
        v = np.exp(rng.normal(7.75, 0.75, n))
        return np.clip(np.round(v), 250, 18424).astype(int)
    if name == "installment_rate":
        return rng.choice([1, 2, 3, 4], size=n, p=[0.136, 0.231, 0.157, 0.476])
    if name == "residence_since":
        return rng.choice([1, 2, 3, 4], size=n, p=[0.130, 0.308, 0.149, 0.413])
    if name == "age_years":
        v = 19.0 + np.exp(rng.normal(2.65, 0.62, n))
        return np.clip(np.round(v), 19, 75).astype(int)
    if name == "existing_credits":
        return rng.choice([1, 2, 3, 4], size=n, p=[0.633, 0.333, 0.028, 0.006])
    if name == "people_liable":
        return rng.choice([1, 2], size=n, p=[0.845, 0.155])
    raise KeyError(name)


@lru_cache(maxsize=1)
def synthetic_fixture_text(seed=20240) -> str:
    """Deterministic german.data-format sample: 1000 rows, 700 positives.

    Outcomes follow a logistic signal in a few covariates (checking
    status, duration, credit amount, savings) plus noise, then the
    closest-to-the-boundary draws are flipped so the split is exactly
    700/300 as in the real data.
    """
    n = 1000
    rng = np.random.default_rng(seed)
    columns = {}
    for name, codes in CODEBOOK:
        if codes is None:
            columns[name] = _synthetic_numeric(name, rng, n)
        else:
            weights = np.asarray(_CATEGORICAL_WEIGHTS[name], dtype=float)
            idx = rng.choice(len(codes), size=n, p=weights / weights.sum())
            columns[name] = [codes[k] for k in idx]

    checking = columns["checking_status"]
    savings = columns["savings_account"]
    score = (
        0.9
        + np.array([{"A11": -1.1, "A12": -0.4, "A13": 0.5, "A14": 1.2}[c] for c in checking])
        - 0.025 * (columns["duration_months"] - 21)
        - 0.00009 * (columns["credit_amount"] - 3270)
        + np.array([{"A61": -0.3, "A62": 0.0, "A63": 0.2, "A64": 0.5, "A65": 0.4}[c] for c in savings])
        + 0.010 * (columns["age_years"] - 35)
    )
    prob = 1.0 / (1.0 + np.exp(-score))
    y = (rng.random(n) < prob).astype(int)
    ones = int(y.sum())
    if ones > 700:
        flip = np.where(y == 1)[0]
        flip = flip[np.argsort(prob[flip])][: ones - 700]
        y[flip] = 0
    elif ones < 700:
        flip = np.where(y == 0)[0]
        flip = flip[np.argsort(-prob[flip])][: 700 - ones]
        y[flip] = 1

    lines = []
    for i in range(n):
        fields = [str(columns[name][i]) for name, _ in CODEBOOK]
        fields.append("1" if y[i] == 1 else "2")
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def load_records(path=None):
    """Records from a file, the environment override, or the fixture.

    Resolution order: explicit ``path``, the PGGAP_GERMAN_DATA
    environment variable, then the bundled synthetic sample.  Returns
    (records, source_label).
    """
    if path is None:
        path = os.environ.get(ENV_DATA_PATH) or None
    if path is not None:
        with open(path) as handle:
            return parse_german_data(handle), str(path)
    return parse_german_data(synthetic_fixture_text()), "synthetic"


def load_dataset(path=None, spec: EncodingSpec | None = None):
    """Encoded dataset plus its source label; see ``load_records``."""
    records, source = load_records(path)
    return encode(records, spec), source
