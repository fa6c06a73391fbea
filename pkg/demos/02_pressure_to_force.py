# %% [markdown]
# From eight barometer readings back to a contact force and location.
#
# The forward model turns (theta, phi, F) into 8 quantized pressures; a small
# MLP learns the inverse from a synthetic "asterisk" probing dataset.

# %%
import numpy as np

from fingertip.estimator import evaluate, forward, train
from fingertip.kinematics import ContactAngles, ContactForce
from fingertip.sensor import ContactState, PressureSensorLayout, generate_dataset, synthesize

layout = PressureSensorLayout.default()
state = ContactState(ContactAngles(0.1, -0.2), ContactForce(0.5, -0.3, -4.0))
print("pressures for a 4 N press:", np.round(synthesize(layout, state).values, 4))

# %% A desk-sized dataset: ~36k labelled samples, a couple of seconds to build
ds = generate_dataset(seed=0)
print(len(ds), "records;", int(ds.train_mask.sum()), "for training")

# %% Ten epochs of Adam (this is the slow cell, ~10 s)
model, tr, te = train(ds, seed=0, log=print)
print(f"test  force RMSE {te.force_rmse:.3f} N   angle RMSE {te.angle_rmse:.4f} rad")
print(f"train force RMSE {tr.force_rmse:.3f} N   angle RMSE {tr.angle_rmse:.4f} rad")

# %% What it predicts for the press above
pred = forward(model, synthesize(layout, state).values)
print("Fx Fy Fz theta phi:", np.round(pred, 3))

# %% [markdown]
# Per-output errors; Fz carries most of the force error since it spans the
# widest range.

# %%
for name, err in zip(("Fx", "Fy", "Fz", "theta", "phi"), evaluate(model, ds).per_output):
    print(f"{name:>5}  {err:.4f}")
