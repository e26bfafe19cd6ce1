/*
 * Copyright 2026 The byzsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "byzsim/aggregators.hpp"
#include "byzsim/analysis.hpp"
#include "byzsim/attacks.hpp"
#include "byzsim/clustering.hpp"
#include "byzsim/config.hpp"
#include "byzsim/datasets.hpp"
#include "byzsim/defense.hpp"
#include "byzsim/error.hpp"
#include "byzsim/gradients.hpp"
#include "byzsim/models.hpp"
#include "byzsim/normal.hpp"
#include "byzsim/report.hpp"
#include "byzsim/rng.hpp"
#include "byzsim/signguard.hpp"
#include "byzsim/simulation.hpp"
