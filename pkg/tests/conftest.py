import numpy as np
import pytest

from costsched.config import ScenarioConfig
from costsched.drop import drop_from_parts
from costsched.scenario import LOCAL, SINGLE, Cluster, Lsp, Point3, User, VisibilityRegion


def make_cluster(cid, pos, vr_xy, spread=(2.0, 2.0, 1.0), kind=SINGLE, owner=None, cfg=None):
    cfg = cfg or ScenarioConfig()
    p = Point3(*map(float, pos))
    vr = VisibilityRegion(Point3(float(vr_xy[0]), float(vr_xy[1]), 0.0),
                          cfg.vr_radius, cfg.vr_transition, cid)
    return Cluster(cid, kind, p, p, spread, spread, Lsp(1e-7, 5.0, 1.0), 0.0, vr, owner)


def two_user_drop(shared: bool, m=64, seed=0):
    """Two users on one bearing from a scatterer at (100, 0).

    ``shared=True``: one far cluster seen by both users.
    ``shared=False``: each user sees only its own far cluster.
    """
    cfg = ScenarioConfig(k_users=2, m_antennas=m, k_selected=1, bs_local_cluster=False)
    users = [User(0, Point3(150.0, 0.0, 1.5)), User(1, Point3(190.0, 0.0, 1.5))]
    if shared:
        clusters = [make_cluster(0, (100.0, 0.0, 3.0), (170.0, 0.0), cfg=cfg)]
    else:
        clusters = [make_cluster(0, (100.0, 60.0, 3.0), (150.0, -40.0), cfg=cfg),
                    make_cluster(1, (120.0, -80.0, 3.0), (190.0, 40.0), cfg=cfg)]
    return drop_from_parts(cfg, users, clusters, rng=seed)


# acceptance criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def small_cfg():
    return ScenarioConfig(k_users=40, m_antennas=32, k_selected=8, cell_size=300).validate()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


__all__ = ["ACCEPTANCE", "make_cluster", "two_user_drop", "LOCAL"]
