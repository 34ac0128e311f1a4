import sys, json
import numpy as np
from ehrelay.env import SimParams
from ehrelay.agent import TrainConfig, train, evaluate
from ehrelay.harness import seed_streams, make_env

name, optimizer, mu, omega, sync, episodes = sys.argv[1:7]
mu, omega = float(mu), float(omega)
sync, episodes = int(sync), int(episodes)

p = SimParams(n_relays=2)
cfg = TrainConfig(episodes=episodes, optimizer=optimizer, step_size=mu,
                  discount=omega, sync_period=sync)
env = make_env(p, 1, "probe-env")
rep = train(env, cfg, seed_streams(1, ["probe-agent"])["probe-agent"])

losses = np.array(rep.mean_loss)
ma = np.array([np.nanmean(losses[max(0, i - 49):i + 1])
               for i in range(len(losses))])
def factory(seed): return make_env(p, seed, "probe-eval")
st = evaluate(rep.params, factory, 30_000, list(range(201, 211)),
              mask_infeasible=True)
idx = min(499, len(ma) - 1)
print(json.dumps({
    "name": name,
    "ma_peak": float(np.nanmax(ma)),
    "ma_at_500": float(ma[idx]),
    "ratio": float(ma[idx] / np.nanmax(ma)),
    "masked_aoi": st.mean_aoi,
    "stderr": st.stderr_aoi,
    "elapsed_s": rep.elapsed_s,
}))
