"""Shared fixtures: the expensive offline pipelines are built once."""

import pytest

from preim.bench import (
    preim_pipeline,
    standard_pipeline,
    testcase_a,
    testcase_b,
)
from preim.fem import hf_solve
from preim.pod import GramOperator
from preim.util import parallel_map

#: mesh refinement for the desk-scale benchmark runs
REFINE_A = 2
REFINE_B = 2


@pytest.fixture(scope="session")
def case_a():
    return testcase_a()


@pytest.fixture(scope="session")
def case_b():
    return testcase_b()


@pytest.fixture(scope="session")
def model_a(case_a):
    return case_a.build_model(REFINE_A)


@pytest.fixture(scope="session")
def model_b(case_b):
    return case_b.build_model(REFINE_B)


@pytest.fixture(scope="session")
def gram_a(model_a):
    return GramOperator.from_model(model_a)


@pytest.fixture(scope="session")
def hf_train_a(model_a, case_a):
    return parallel_map(lambda mu: hf_solve(model_a, mu), case_a.p_train)


@pytest.fixture(scope="session")
def standard_a(model_a, case_a, hf_train_a):
    return standard_pipeline(model_a, case_a, hf_trajectories=hf_train_a)


@pytest.fixture(scope="session")
def preim_a(model_a, case_a):
    return preim_pipeline(model_a, case_a, variant="preim")


@pytest.fixture(scope="session")
def preimnr_a(model_a, case_a):
    return preim_pipeline(model_a, case_a, variant="preim-nr")


@pytest.fixture(scope="session")
def user_a(model_a, case_a):
    return preim_pipeline(model_a, case_a, variant="user")


@pytest.fixture(scope="session")
def preim_b(model_b, case_b):
    return preim_pipeline(model_b, case_b, variant="preim")


@pytest.fixture(scope="session")
def verify_ref_a(model_a, case_a):
    return parallel_map(lambda mu: hf_solve(model_a, mu), case_a.verification)
