# Copyright 2026 The SOPE Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


import math
import os
from pathlib import Path

import pytest

import sope

CONFIG_DIR = Path(os.environ.get("SOPE_CONFIG_DIR", Path(__file__).parents[2] / "configs"))


@pytest.fixture
def graph():
    mdp = sope.build_graph_env(3, 0.9)
    return mdp, sope.make_static_policy(mdp, 0.5), sope.make_static_policy(mdp, 0.8)


def test_graph_shape(graph):
    mdp, _, _ = graph
    assert mdp.n_states == 7
    assert mdp.n_actions == 2
    assert mdp.horizon == 3
    assert mdp.reward.shape == (7, 2)


def test_occupancy_normalized(graph):
    mdp, _, pi_e = graph
    d = sope.occupancy_avg(mdp, pi_e)
    assert d.sum() == pytest.approx(1.0, abs=1e-12)
    assert len(sope.occupancy_t(mdp, pi_e)) == mdp.horizon


def test_endpoints_match(graph):
    mdp, pi_b, pi_e = graph
    data = sope.sample_dataset(mdp, pi_b, pi_e, 64, 7)
    ratio = sope.estimate_ratio(data, "model-based")
    L = mdp.horizon
    assert sope.estimate_sope(data, 0, ratio).value == sope.estimate_sis(data, ratio).value
    assert sope.estimate_sope(data, L, None).value == sope.estimate_pdis(data).value
    assert sope.estimate_wsope(data, L, None).value == sope.estimate_cwpdis(data).value


def test_pdis_mean_close_to_truth(graph):
    mdp, pi_b, pi_e = graph
    truth = sope.exact_j(mdp, pi_e)
    estimates = [sope.estimate_pdis(sope.sample_dataset(mdp, pi_b, pi_e, 200, 1000 * k)).value
                 for k in range(20)]
    mean = sum(estimates) / len(estimates)
    sd = math.sqrt(sum((e - mean) ** 2 for e in estimates) / (len(estimates) - 1))
    assert abs(mean - truth) < 4 * sd / math.sqrt(len(estimates)) + 1e-12


def test_dr_with_exact_q(graph):
    mdp, pi_b, pi_e = graph
    data = sope.sample_dataset(mdp, pi_b, pi_e, 32, 3)
    ratio = sope.oracle_ratio(mdp, pi_e, pi_b, sope.RatioKind.ORACLE_AVERAGE)
    q = sope.exact_q(mdp, pi_e, sope.HorizonMode.FINITE)
    est = sope.estimate_dr_sope(data, 1, ratio, q)
    assert math.isfinite(est.value)


def test_support_error():
    mdp = sope.build_graph_env(2, 0.9)
    pi_b = sope.make_static_policy(mdp, 1.0)
    pi_e = sope.make_static_policy(mdp, 0.5)
    with pytest.raises(sope.SupportError):
        sope.sample_dataset(mdp, pi_b, pi_e, 4, 0)


def test_config_errors_carry_position():
    with pytest.raises(sope.ConfigError, match="gama"):
        sope.parse_config_string("environment:\n  kind: graph\n  gama: 0.9\n")


def test_sweep_roundtrip(tmp_path):
    config = sope.parse_config(
        CONFIG_DIR / "demo.cfg",
        ["trials=3", "batch_sizes=[16]", "bootstrap_resamples=50", "families=[SOPE]"],
    )
    report = sope.run_sweep(config)
    assert report.rng_algorithm == sope.RNG_ALGORITHM
    assert {row["family"] for row in report.aggregates} == {"SOPE"}
    assert len(report.rows) == 3 * len(report.aggregates)
    report.write_csv(tmp_path)
    assert (tmp_path / "raw.csv").read_text() == report.raw_csv()
    assert report.svg().lstrip().startswith("<")


def test_builtin_checks_pass():
    results = sope.run_builtin_checks()
    assert results
    assert all(r.passed for r in results), [(r.name, r.detail) for r in results if not r.passed]
