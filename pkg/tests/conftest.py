import numpy as np
import pytest

from droboost.core import Dataset


def noisy_linear(n, d=3, seed=0, noise=0.8):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    score = X[:, 0] + 0.5 * X[:, 1] + rng.normal(scale=noise, size=n)
    return Dataset(X, np.where(score > 0, 1.0, -1.0))


@pytest.fixture
def toy50():
    return noisy_linear(50, seed=1)


@pytest.fixture
def toy200():
    return noisy_linear(200, d=4, seed=7)


UCI_COLUMNS = (["ID", "LIMIT_BAL", "SEX", "EDUCATION", "MARRIAGE", "AGE", "PAY_0"]
               + [f"PAY_{k}" for k in range(2, 7)] + [f"BILL_AMT{k}" for k in range(1, 7)]
               + [f"PAY_AMT{k}" for k in range(1, 7)] + ["default payment next month"])


def write_uci_like(path, n, seed=0):
    """CSV shaped like the raw credit-default export: two header rows, ID column, 0/1 label."""
    rng = np.random.default_rng(seed)
    limit = rng.integers(1, 50, size=n) * 10000
    pay = rng.integers(-2, 5, size=(n, 6))
    bill = rng.normal(40000, 20000, size=(n, 6)).round()
    amt = rng.exponential(3000, size=(n, 6)).round()
    score = 0.8 * pay[:, 0] - limit / 2e5 + rng.normal(scale=0.8, size=n)
    default = (score > 0.6).astype(int)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join([""] + [f"X{k}" for k in range(1, 24)] + ["Y"]) + "\n")
        fh.write(",".join(UCI_COLUMNS) + "\n")
        for i in range(n):
            row = [i + 1, limit[i], rng.integers(1, 3), rng.integers(1, 5), rng.integers(1, 4), rng.integers(21, 70)]
            row += list(pay[i]) + list(bill[i]) + list(amt[i]) + [default[i]]
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    return path


def write_generic(path, data, label_name="label", positive="yes"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join([f"x{j}" for j in range(data.d)] + [label_name]) + "\n")
        for x, y in zip(data.features, data.labels):
            fh.write(",".join(repr(float(v)) for v in x) + "," + (positive if y > 0 else "no") + "\n")
    return path


ACCEPTANCE = []


@pytest.fixture
def criterion():
    """record(name, ok, detail): ok is True, False or None (skipped)."""

    def record(name, ok, detail=""):
        ACCEPTANCE.append((name, ok, detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        terminalreporter.write_line(f"{status}  {name}: {detail}")
