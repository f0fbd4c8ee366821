# Copyright 2026 The SemanticSTR Desk Authors
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

"""Python bindings for the SemanticSTR recognizer."""

import json

from ._core import (
    EOS,
    GO,
    MAX_STEPS,
    PAD,
    Model,
    SstrError,
    decode,
    encode,
    encompasses,
    iou,
    normalize,
    read_image,
    run_cli,
    scale_box,
    word_accuracy,
    word_match,
)
from . import _core

__all__ = [
    "EOS", "GO", "MAX_STEPS", "PAD", "Model", "SstrError", "compare", "decode", "default_config", "encode",
    "encompasses", "iou", "normalize", "read_image", "run_cli", "scale_box", "word_accuracy", "word_match",
]


def compare(baseline, candidate):
    """Compares two eval.json reports and returns the report as a dict."""
    return json.loads(_core.compare_json(str(baseline), str(candidate)))


def default_config():
    """Experiment config dict with every field at its default."""
    return json.loads(_core.default_config_json())
