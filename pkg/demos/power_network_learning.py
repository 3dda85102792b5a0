"""Watch a sparse wireless network learn its transmit powers from scalar
utility feedback only.

Fifty transmitter-receiver links are each active in ~5% of slots.  An active
link perturbs its log-power, observes its own noisy utility, collects the
utilities its neighbors managed to deliver, and nudges its power along the
perturbation direction.  No gradients, no channel state exchange.

Run:  python3 demos/power_network_learning.py
Writes demos/out/actions.svg and a trajectory CSV.
"""

import os

from dosp import chart
from dosp.harness import ExperimentConfig, emit_outputs, run_experiment

HERE = os.path.dirname(__file__)
OUT = os.path.join(HERE, "out")


def main():
    cfg = ExperimentConfig.from_yaml(
        os.path.join(HERE, "..", "configs", "power_actions_single_run.yaml"))
    # single replication, trimmed horizon so the demo stays under a minute
    d = cfg.to_dict()
    d["run"]["horizon"] = 20_000
    d["run"]["metrics_stride"] = 200
    cfg = ExperimentConfig.from_dict(d)

    print(f"simulating {cfg.network.n_nodes} links for {cfg.horizon} slots "
          f"(q_activity = {cfg.network.q_activity}) ...")
    dataset = run_experiment(cfg, keep_actions=True)

    actions = dataset.actions[0]  # (T, N)
    spread = actions.max(axis=1) - actions.min(axis=1)
    print(f"action spread: {spread[0]:.2f} at k=1  ->  {spread[-1]:.2f} at k={cfg.horizon}")
    print(f"mean log-power at the end: {actions[-1].mean():.3f}")

    os.makedirs(OUT, exist_ok=True)
    series = [(f"node {i}", dataset.ks, actions[:, i])
              for i in range(0, cfg.network.n_nodes, 5)]
    chart.write_line_chart(os.path.join(OUT, "actions.svg"), series,
                           "per-node actions under sporadic learning",
                           "slot k", "action a_i", loglog=False)
    emit_outputs(dataset, OUT)
    print(f"wrote {OUT}/actions.svg and trajectory CSVs")


if __name__ == "__main__":
    main()
