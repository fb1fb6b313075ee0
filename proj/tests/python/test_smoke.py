import math

import numpy as np
import pytest

import robayes as rb


def normal_pdf(x, var=1.0):
    return np.exp(-0.5 * x * x / var) / math.sqrt(2 * math.pi * var)


def test_fisher_information_of_a_wide_normal():
    g = np.asarray(rb.default_f_grid())
    assert abs(rb.fisher_information_grid(normal_pdf(g, 2.0), g) - 0.5) < 1e-3


def test_distribution_validation():
    d = rb.DiscreteDistribution([-1.0, 1.0], [0.25, 0.75])
    assert len(d) == 2
    assert d.mean() == pytest.approx(0.5)
    with pytest.raises(rb.RobayesError):
        rb.DiscreteDistribution([0.0, 1.0], [0.5, 0.6])


def test_bayes_rule_for_a_two_point_prior_is_tanh():
    rule = rb.bayes_rule(rb.DiscreteDistribution.two_point(1.0))
    x = np.linspace(-4, 4, 41)
    assert np.max(np.abs(rule(x) - np.tanh(x))) < 1e-10


def test_huber_dirac_threshold():
    k = rb.huber_k(0.1)
    rule = rb.huber_rule("dirac:0", 0.1)
    assert rule(0.5 * k) == 0.0
    assert rule(k + 1.0) == pytest.approx(1.0)
    assert rb.huber_bound("twopoint:2", 0.2) == pytest.approx(1.67, abs=0.05)


def test_mallows_two_point():
    s = rb.solve_mallows(rb.DiscreteDistribution.two_point(2.0), 0.2)
    assert s.converged
    assert abs(s.worst_risk - 1.67) < 0.05
    h = s.mass_points()
    assert abs(sum(h.weights) - 1.0) < 1e-9
    r = s.rule()
    risk = rb.pointwise_risk(r, np.asarray(h.support))
    assert np.all(risk <= s.worst_risk + 1e-9)


def test_npmle_and_risk():
    theta, x = rb.draw("unif03", "gauss", 400, 3)
    assert len(x) == 400 and min(theta) >= 0 and max(theta) <= 3
    fit = rb.fit_npmle(x)
    assert fit.converged and fit.kkt_gap <= 1e-6
    prior = rb.DiscreteDistribution.parse("unif03")
    r_eb = rb.bayes_risk(fit.rule(), prior)
    r_mle = rb.bayes_risk(rb.identity_rule(), prior)
    assert r_mle == pytest.approx(1.0, abs=1e-10)
    assert r_eb < r_mle
    with pytest.raises(rb.RobayesError):
        rb.fit_npmle([1.0])


def test_brown_identity():
    assert rb.brown_identity_gap(rb.DiscreteDistribution.two_point(2.0)) < 2e-3
