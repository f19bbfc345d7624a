// Copyright 2026 The Poolcast Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.

#pragma once

#include "poolcast/asymptotics.hpp"
#include "poolcast/cli.hpp"
#include "poolcast/common.hpp"
#include "poolcast/distribution.hpp"
#include "poolcast/estimate.hpp"
#include "poolcast/evaluate.hpp"
#include "poolcast/models.hpp"
#include "poolcast/normal.hpp"
#include "poolcast/objective.hpp"
#include "poolcast/optimizer.hpp"
#include "poolcast/parallel.hpp"
#include "poolcast/pool.hpp"
#include "poolcast/rng.hpp"
#include "poolcast/scoring.hpp"
#include "poolcast/serialize.hpp"
#include "poolcast/series.hpp"
#include "poolcast/transform.hpp"
