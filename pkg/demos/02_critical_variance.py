# %% [markdown]
# # Critical variance and the error exponent
#
# The relative error of the expected-EC approximation decays like
# exp(-(1 + 1/sigma_c^2) u^2 / 2) times the Gaussian tail. Here we compute
# sigma_c^2 for a few covariances.

# %%
import math

from echeuristic import (
    IsotropicModel,
    cosine_mixture,
    latitude_circle,
    normalize_second_moment,
    sigma_critical_finite_kl,
    sigma_critical_interval,
    sigma_isotropic_convex,
    sigma_monotone_shortcut,
    squared_exponential,
)
from echeuristic.critical_variance import latitude_circle_embedding

# %% Squared exponential: monotone covariance, so the local value wins
se = squared_exponential(1.0)
full = sigma_critical_interval(se, 5.0)
print("squared exponential:", full.sigma_c_sq, "shortcut:", sigma_monotone_shortcut(se, 5.0).sigma_c_sq)
print("  exponent on the u^2/2 scale:", 1 + 1 / full.sigma_c_sq)

# %% A two-frequency mixture: the covariance oscillates and the supremum may sit away from zero lag
blend = normalize_second_moment(cosine_mixture([0.5, 0.5], [1.0, 3.0]))
rep = sigma_critical_interval(blend, 3.0)
print(f"blend: sigma_c^2={rep.sigma_c_sq:.6f} at t={rep.argmax_t:.4f}, attained locally: {rep.attained_locally}")

# %% A pure cosine is degenerate: zero critical variance, super-exponential accuracy
cos1 = cosine_mixture([1.0], [1.0])
print("cosine:", sigma_critical_interval(cos1, math.pi).to_dict())

# %% Isotropic field on a convex body in the plane
print("isotropic SE in 2D:", sigma_isotropic_convex(IsotropicModel(se, 2)).sigma_c_sq)

# %% A finite Karhunen-Loeve field: the latitude circle of radius 1/2 on the sphere
kl = sigma_critical_finite_kl(latitude_circle_embedding(0.5))
stationary = sigma_critical_interval(normalize_second_moment(latitude_circle(0.5)),
                                     math.pi * normalize_second_moment(latitude_circle(0.5)).scale)
print(f"latitude circle: finite-KL {kl.sigma_c_sq:.8f}, stationary {stationary.sigma_c_sq:.8f}, "
      f"critical angle {math.degrees(kl.theta_c):.4f} deg")
