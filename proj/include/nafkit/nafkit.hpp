/*
 * Copyright 2026 The nafkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef NAFKIT_NAFKIT_HPP
#define NAFKIT_NAFKIT_HPP

#include "nafkit/checkpoint.hpp"
#include "nafkit/conditioner.hpp"
#include "nafkit/csv.hpp"
#include "nafkit/diffgraph.hpp"
#include "nafkit/errors.hpp"
#include "nafkit/experiments.hpp"
#include "nafkit/flow.hpp"
#include "nafkit/parallel.hpp"
#include "nafkit/stablemath.hpp"
#include "nafkit/targets.hpp"
#include "nafkit/tensor.hpp"
#include "nafkit/training.hpp"
#include "nafkit/transformer.hpp"
#include "nafkit/transformer_ops.hpp"
#include "nafkit/universal.hpp"

#endif  // NAFKIT_NAFKIT_HPP
