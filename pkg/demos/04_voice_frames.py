"""Frame-level voice detection with a bidirectional recurrent network.

Clips mix vibrato tones ("voice") with steady tones; every 16 ms mel frame
carries a label. A bidirectional RNN reads the whole clip and emits one
sigmoid per frame. The band-energy threshold is a sanity baseline.
"""

import numpy as np

from mirforge.tasks import band_energy_accuracy, make_voice_task, prepare
from mirforge.train import TrainConfig, evaluate, train

data = make_voice_task(seed=0).generate()
print("mel clips:", data.x_train.shape, "voiced fraction:", round(float(data.y_train.mean()), 3))
print("band-energy baseline:", band_energy_accuracy(data))

prep = prepare("birnn-voice", data, "voice")
model = prep.spec.build(seed=0)
print(prep.spec.to_text())
history = train(model, (prep.x_train, prep.y_train), TrainConfig("binary-xent", "adam", 1e-2, 30, 4, 0))
print("final train loss:", round(history.train_loss[-1], 4))
loss, acc = evaluate(model, prep.x_test, prep.y_test, prep.loss)
print(f"test frame accuracy {acc:.3f}")

clip = model(prep.x_test[:1]).data[0, :, 0]
print("clip 0 truth :", "".join("#" if v else "." for v in prep.y_test[0, :, 0] > 0.5))
print("clip 0 output:", "".join("#" if v else "." for v in clip > 0.5))
