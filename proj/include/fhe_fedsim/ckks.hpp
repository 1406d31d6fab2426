/*
 * Copyright 2026 The fhe-fedsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "fhe_fedsim/ckks/ciphertext.hpp"
#include "fhe_fedsim/ckks/context.hpp"
#include "fhe_fedsim/ckks/encoder.hpp"
#include "fhe_fedsim/ckks/evaluator.hpp"
#include "fhe_fedsim/ckks/keys.hpp"
#include "fhe_fedsim/ckks/tolerances.hpp"
