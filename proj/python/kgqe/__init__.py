# Copyright 2026 The kgqe Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Step-wise logical query execution over knowledge graphs."""

from ._core import (
    ConfigError,
    Error,
    EvalError,
    ExecutionError,
    FormatError,
    GenerationError,
    GraphSplit,
    KnowledgeGraph,
    LookupError,
    PromptError,
    QueryError,
    RetrievalError,
    ScriptError,
    TransportError,
    classify,
    compile,
    eval_brute_force,
    execute,
    filtered_rank,
    generate,
    mrr,
    parse_answer,
    prompt_template_sha256,
    retrieve,
    run,
    template,
)

__all__ = [name for name in dir() if not name.startswith("_")]
