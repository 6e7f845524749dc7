"""Synthetic AI4I-format records for offline runs and tests.

The public AI4I 2020 file is itself synthetic, and its documentation
describes how each column and failure mode was produced. This module
follows those rules:

* product quality L/M/H drawn with probabilities 0.5/0.3/0.2;
* air temperature is a random walk rescaled to 300 K +/- 2 K;
* process temperature tracks air temperature plus 10 K with its own walk;
* torque is normal around 40 Nm (sd 10 Nm), never below 3 Nm;
* rotational speed falls hyperbolically with torque, plus normal noise;
* each process adds 2/3/5 min (L/M/H) of wear to the current tool, which is
  replaced at a random wear in [200, 240] min, failing in 51 of 120 cases;
* HDF: temperature difference < 8.6 K and speed < 1380 rpm;
* PWF: mechanical power outside [3500, 9000] W;
* OSF: wear x torque above 11000/12000/13000 minNm for L/M/H;
* RNF: 0.1 % chance per process;
* ``Machine failure`` is set when any mode fires.

The coefficients that the documentation leaves open (the temperature
coupling and the speed/torque curve) are fitted to the column means and
standard deviations of the public file. The output is a stand-in with the
same schema and failure mechanics, not a copy of that file.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .dataset import FAILURE_COLUMN, FAULT_LABELS, NUMERIC_COLUMNS, Dataset, schema

TYPE_PROBS = {"L": 0.5, "M": 0.3, "H": 0.2}
WEAR_STEP = {"L": 2, "M": 3, "H": 5}
OVERSTRAIN_LIMIT = {"L": 11000.0, "M": 12000.0, "H": 13000.0}

# speed = a + b / (torque + c), fitted through the public file's
# (min torque, mean, max torque) speed levels
SPEED_CURVE = (641.23, 54159.7, 20.327)
SPEED_NOISE_RPM = 70.0
# process temperature = 310 + coupling * air deviation + walk
TEMP_COUPLING = 1.296
PROCESS_WALK_SD = 0.71


def _walk(rng: np.random.Generator, n: int) -> np.ndarray:
    w = np.cumsum(rng.standard_normal(n))
    return (w - w.mean()) / w.std()


def simulate_ai4i(n: int = 10000, seed: int = 2020) -> Dataset:
    """Generate ``n`` AI4I-format records."""
    rng = np.random.default_rng(seed)
    letters = np.array(list(TYPE_PROBS))
    types = letters[rng.choice(len(letters), size=n, p=list(TYPE_PROBS.values()))]

    air_walk = _walk(rng, n)
    proc_walk = _walk(rng, n)
    # decorrelate the second walk so the coupling coefficient is the only link
    proc_walk -= air_walk * (air_walk @ proc_walk) / (air_walk @ air_walk)
    proc_walk /= proc_walk.std()
    air = np.round(300.0 + 2.0 * air_walk, 1)
    process = np.round(310.0 + TEMP_COUPLING * air_walk + PROCESS_WALK_SD * proc_walk, 1)

    torque = rng.normal(40.0, 10.0, n)
    low = torque < 3.0
    while low.any():
        torque[low] = rng.normal(40.0, 10.0, int(low.sum()))
        low = torque < 3.0
    torque = np.round(torque, 1)
    a, b, c = SPEED_CURVE
    speed = np.round(a + b / (torque + c) + rng.normal(0.0, SPEED_NOISE_RPM, n)).astype(np.int64)

    wear = np.zeros(n, dtype=np.int64)
    twf = np.zeros(n, dtype=np.int64)
    current, limit = 0, int(rng.integers(200, 241))
    for i in range(n):
        wear[i] = current
        if current >= limit:
            twf[i] = int(rng.random() < 51 / 120)
            current, limit = 0, int(rng.integers(200, 241))
        else:
            current += WEAR_STEP[types[i]]

    power = torque * speed * 2.0 * np.pi / 60.0
    hdf = ((process - air) < 8.6) & (speed < 1380)
    pwf = (power < 3500.0) | (power > 9000.0)
    osf = wear * torque > np.array([OVERSTRAIN_LIMIT[t] for t in types])
    rnf = rng.random(n) < 0.001
    flags = np.column_stack([twf.astype(bool), hdf, pwf, osf, rnf]).astype(np.int64)

    serial_base = {t: int(rng.integers(10000, 50000)) for t in letters}
    counters = {t: 0 for t in letters}
    product_ids = []
    for t in types:
        counters[t] += 1
        product_ids.append(f"{t}{serial_base[t] + counters[t]}")

    frame = pd.DataFrame(
        {
            "UDI": np.arange(1, n + 1, dtype=np.int64),
            "Product ID": product_ids,
            "Type": types,
            NUMERIC_COLUMNS[0]: air,
            NUMERIC_COLUMNS[1]: process,
            NUMERIC_COLUMNS[2]: speed,
            NUMERIC_COLUMNS[3]: torque,
            NUMERIC_COLUMNS[4]: wear,
            FAILURE_COLUMN: flags.max(axis=1),
            **{name: flags[:, j] for j, name in enumerate(FAULT_LABELS)},
        }
    )
    assert list(frame.columns) == [name for name, _ in schema("UDI")]
    return Dataset(frame=frame, id_column="UDI")
