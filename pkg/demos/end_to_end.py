"""Train, quantize, evaluate and benchmark tinymask-ref on synthetic faces.

Run: python demos/end_to_end.py [epochs]
"""

import sys

import numpy as np

from tinymask import datakit, engine, evalkit, modelio, quantizer
from tinymask.netgraph import build_network, zoo
from tinymask.trainer import TrainConfig, predict_proba, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 5

# synthetic faces stand in for a real capture set; hold out a test split first
m = datakit.synth_dataset(1000, seed=1)
pool, test = datakit.split(m, 0.2, seed=1)
tr, va = datakit.split(pool, 0.2, seed=1)
x_tr, y_tr = datakit.to_arrays(tr)
x_va, y_va = datakit.to_arrays(va)
x_te, y_te = datakit.to_arrays(test)
print(f"train {len(tr)}  val {len(va)}  test {len(test)}")

cfg = zoo("tinymask-ref")
params, history = train(TrainConfig(max_epochs=epochs), cfg, (x_tr, y_tr), (x_va, y_va))
print(history.to_csv())

# calibrate on 100 seeded test images, then quantize
net, _ = build_network(cfg)
rng = np.random.default_rng(0)
rep = x_te[np.sort(rng.choice(len(x_te), 100, replace=False))]
qm = quantizer.quantize_model(net, params, quantizer.calibrate(net, params, rep))

float_bytes = len(modelio.serialize(modelio.FloatModel(cfg, params)))
int8_bytes = len(modelio.serialize(qm))
print(modelio.size_report(float_bytes, int8_bytes).to_text())
print(modelio.budget_check(int8_bytes).to_text())

p_float = predict_proba(net, params, x_te) >= 0.5
p_int8 = engine.predict(qm, x_te) >= 0.5
print(evalkit.report(evalkit.confusion(p_int8.astype(int), y_te)).to_text())
print(evalkit.compare(p_float.astype(int), p_int8.astype(int), y_te).to_text())

label, p = engine.infer(qm, x_te[:1])
print(f"first test image: {label} (p={p:.3f}, truth {engine.Label(int(y_te[0]))})")
print(engine.bench(qm, trials=5).to_text())
