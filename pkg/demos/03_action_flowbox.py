# coding: utf-8

# # Flowboxes for an R^2 action on T^3
#
# The action translates along (1, 0, 0) and (0, sqrt2 - 1, 1). A second
# action Psi_u = Phi_{Bu} commutes with it; the matrix cocycle recovers B.

# In[1]:

import numpy as np

from flowcent.action import (build_flowbox, estimate_epsilon0_action, flowbox_bounds,
                             flowbox_map, invert_flowbox, recover_A_action)
from flowcent.engine import LinearReparamAction, TorusTranslationAction

Phi = TorusTranslationAction([[1, 0], [0, np.sqrt(2) - 1], [0, 1]])
print("epsilon0 =", estimate_epsilon0_action(Phi))

# In[2]:

x = Phi.point(np.array([0.1, 0.2, 0.3]))
chart = build_flowbox(Phi, x)
print(f"r0 = {chart.r0:.3g}, delta = {chart.delta:.3g}, mu = {chart.mu:.3g}, a = {chart.a:.3g}")
print("DF bounds (m, |.|):", flowbox_bounds(chart))

# In[3]:

p = 0.2 * chart.delta * np.ones(3)
y = Phi.point(flowbox_map(chart, p)[0])
zeta, a = invert_flowbox(chart, y)
q = np.array(zeta.components) + chart.X @ a
print("normal part", np.round(zeta.components, 6), "orbit part", np.round(a, 6))
print("round trip error", np.abs(q - p).max())

# In[4]:

B = np.array([[2.0, 0.0], [1.0, 1.0]])
Psi = LinearReparamAction(Phi, B)
charts = [build_flowbox(Phi, Phi.point(r)) for r in Phi.sample(10, 3)]
field = recover_A_action(Phi, Psi, charts, horizon=20.0)
err = max(np.abs(A - B).max() for _, A in field.samples)
print(f"max |A - B| = {err:.2e}, invariance {field.invariance_residual_max:.2e}, "
      f"basis check {field.basis_check_residual_max:.2e}")
