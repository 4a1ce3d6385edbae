"""
One simulated flight
====================

Fly the bundled scenario once with greedy anchor selection and look at how
the estimate and its one-sigma band track the truth.
"""

# %%
# The bundled scenario: five anchors on the floor, three of them huddled
# together, and a flight that takes off, hovers for two seconds, sweeps
# sideways along y and lands again.
import numpy as np

from rangenav import paper_scenario, run_scenario

sc = paper_scenario()
for a in sc.anchors:
    print(f"anchor {a.id}: {a.p}")

metrics, log = run_scenario(sc)
print(f"position RMSE {metrics.rmse_position:.3f} m")
print(f"velocity RMSE {metrics.rmse_velocity:.3f} m/s")
print(f"attitude RMSE {metrics.rmse_attitude:.2f} deg")
print("ranges per anchor:", metrics.anchor_counts)

# %%
# The log is a set of aligned arrays, one row per 2 ms IMU tick. The
# ``sd`` columns are square roots of the covariance diagonal, so a band plot
# only needs the estimate and the matching column.
every = 10
t = log.t[::every]
print(f"{'t':>5} {'y':>7} {'y_hat':>7} {'sd_y':>6} {'yaw_hat':>8} {'sd_yaw':>7}")
for k in range(0, len(t), 50):
    row = k * every
    print(
        f"{log.t[row]:5.1f} {log.x[row, 1]:7.3f} {log.x_hat[row, 1]:7.3f} {log.sd[row, 1]:6.3f}"
        f" {log.euler_hat[row, 0]:8.2f} {np.degrees(log.sd[row, 8]):7.2f}"
    )

# %%
# With matplotlib installed, draw the position and yaw estimates against the
# truth with a one-standard-deviation band.
try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    from pathlib import Path

    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(7, 8))
    labels = ["x [m]", "y [m]", "z [m]"]
    for i, ax in enumerate(axes[:3]):
        ax.plot(log.t, log.x[:, i], "k", lw=1, label="truth")
        ax.plot(log.t, log.x_hat[:, i], "C0", lw=1, label="estimate")
        ax.fill_between(log.t, log.x_hat[:, i] - log.sd[:, i], log.x_hat[:, i] + log.sd[:, i], color="C0", alpha=0.25)
        ax.set_ylabel(labels[i])
    sd_yaw = np.degrees(log.sd[:, 8])
    axes[3].plot(log.t, log.euler[:, 0], "k", lw=1)
    axes[3].plot(log.t, log.euler_hat[:, 0], "C0", lw=1)
    axes[3].fill_between(log.t, log.euler_hat[:, 0] - sd_yaw, log.euler_hat[:, 0] + sd_yaw, color="C0", alpha=0.25)
    axes[3].set_ylabel("yaw [deg]")
    axes[3].set_xlabel("t [s]")
    axes[0].legend(loc="upper right")
    out = Path(__file__).with_name("output")
    out.mkdir(exist_ok=True)
    fig.tight_layout()
    fig.savefig(out / "single_flight.png", dpi=120)
    print(f"saved {out / 'single_flight.png'}")
