"""Suite-wide guarantees.

Every quotient estimate produced anywhere in the test run must respect the
sphere bound: estimate <= 1.02 * sphere_yamabe_constant(n).  The session
fixture audits the estimate registry at teardown so the bound binds even
for estimates produced incidentally inside other tests.
"""

import pytest

from curvrig.quotient import ESTIMATE_LOG, sphere_yamabe_constant


@pytest.fixture(scope="session", autouse=True)
def quotient_bound_audit():
    ESTIMATE_LOG.clear()
    yield
    offenders = [
        (est.domain, est.n, est.extrapolated, 1.02 * sphere_yamabe_constant(est.n))
        for est in ESTIMATE_LOG
        if est.extrapolated > 1.02 * sphere_yamabe_constant(est.n)
    ]
    assert not offenders, (
        "quotient estimates exceeded the sphere-constant bound: "
        + "; ".join(
            f"{dom} (n={n}): {val:.6f} > {cap:.6f}" for dom, n, val, cap in offenders
        )
    )
