import textwrap

import pytest

from socialcircuits.cli import main

TUTORIAL_CONFIG = """\
input_path: data.txt
output_dir: run
master_seed: 11
classes: ["1,1", "2,1"]
null_model: {n_permutations: 200}
extra_circuits: [planted.json]
sim: {replicates: 5, seeding_rule: empirical_first}
sparse: {K: 6}
degeneracy: {n_perturbations: 5}
plots: true
"""


def make_tutorial(root, plots=True):
    """Synthetic planted data plus a pipeline config in ``root``; returns the config path."""
    rc = main(["generate", "--roster", "10", "--edge", "i0+i1>i2:0.6", "--edge", "i3>i4+i5:0.5",
               "--baseline", "0.2", "--events", "2000", "--seed", "3", "-o", str(root / "data.txt"),
               "--circuit-out", str(root / "planted.json")])
    assert rc == 0
    cfg = root / "config.yaml"
    text = TUTORIAL_CONFIG if plots else TUTORIAL_CONFIG.replace("plots: true", "plots: false")
    cfg.write_text(textwrap.dedent(text))
    return cfg


@pytest.fixture
def tutorial(tmp_path):
    return make_tutorial(tmp_path)
