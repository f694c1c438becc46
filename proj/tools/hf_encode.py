#!/usr/bin/env python3
# Copyright 2026 The tractdiff Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""External encoder for `tractdiff --encoder <name>`.

Usage: hf_encode.py <model> <input.wav> <output.s2v>

Writes the last hidden layer of a pretrained speech model as an S2V1 tensor
[N, D]. Pass it to the CLI as, for example,
  "encoder_command": "python3 tools/hf_encode.py facebook/hubert-base-ls960"
"""

import json
import struct
import sys

import numpy as np
import scipy.io.wavfile
import scipy.signal


def write_s2v(path, array, meta):
    array = np.ascontiguousarray(array, dtype="<f4")
    blob = json.dumps(meta).encode()
    with open(path, "wb") as f:
        f.write(b"S2V1")
        f.write(struct.pack("<I", array.ndim))
        for d in array.shape:
            f.write(struct.pack("<Q", d))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(array.tobytes())


def load_audio(path):
    rate, data = scipy.io.wavfile.read(path)
    if data.dtype.kind == "i":
        data = data / float(np.iinfo(data.dtype).max)
    data = data.astype(np.float32)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if rate != 16000:
        data = scipy.signal.resample_poly(data, 16000, rate).astype(np.float32)
    return data


def main(argv):
    if len(argv) != 4:
        sys.stderr.write(__doc__)
        return 2
    import torch
    from transformers import AutoFeatureExtractor, AutoModel

    model_name, wav_path, out_path = argv[1:]
    extractor = AutoFeatureExtractor.from_pretrained(model_name)
    model = AutoModel.from_pretrained(model_name).eval()
    audio = load_audio(wav_path)
    inputs = extractor(audio, sampling_rate=16000, return_tensors="pt")
    with torch.no_grad():
        hidden = model(**inputs).last_hidden_state[0].numpy()
    write_s2v(out_path, hidden, {"encoder_id": model_name, "stride_s": 0.02})
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
