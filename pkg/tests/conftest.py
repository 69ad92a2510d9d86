import math

from hypothesis import HealthCheck, settings, strategies as st

from speedscale.workload import Instance, JobSpec

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def instances(draw, max_jobs=4, min_jobs=1):
    """Small instances with sizes in [0.1, 2] and releases in [0, 2]."""
    n = draw(st.integers(min_jobs, max_jobs))
    releases = sorted(draw(st.lists(st.floats(0, 2), min_size=n, max_size=n)))
    sizes = draw(st.lists(st.floats(0.1, 2), min_size=n, max_size=n))
    return Instance(tuple(JobSpec(i + 1, r, s) for i, (r, s) in enumerate(zip(releases, sizes))))


def close(a, b, rel=1e-9, abs_=1e-12):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)
