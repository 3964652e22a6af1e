"""The pure-python path must give the same numbers as the compiled kernels."""
import json
import os
import subprocess
import sys

import numpy as np

from fallingballs import MassVector, lyapunov_spectrum, sample_state, simulate

SCRIPT = """
import json, numpy as np
from fallingballs import MassVector, sample_state, simulate, lyapunov_spectrum
from fallingballs._accel import USE_NUMBA
m = MassVector((3, 2, 1))
x = sample_state(m, np.random.default_rng(7))
traj = simulate(x, m, max_collisions=300)
rep = lyapunov_spectrum(x, m, 300)
print(json.dumps({"numba": USE_NUMBA, "t": traj.times.tolist(), "l": traj.sequence,
                  "exp": rep.exponents.tolist()}))
"""


def test_fallback_matches_compiled():
    env = dict(os.environ, FALLINGBALLS_DISABLE_NUMBA="1")
    res = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True,
                         check=True)
    slow = json.loads(res.stdout.strip().splitlines()[-1])
    assert slow["numba"] is False
    m = MassVector((3, 2, 1))
    x = sample_state(m, np.random.default_rng(7))
    traj = simulate(x, m, max_collisions=300)
    rep = lyapunov_spectrum(x, m, 300)
    assert slow["l"] == traj.sequence
    np.testing.assert_allclose(slow["t"], traj.times, rtol=1e-13)
    np.testing.assert_allclose(slow["exp"], rep.exponents, rtol=1e-10, atol=1e-13)
