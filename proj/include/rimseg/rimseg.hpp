// Copyright 2026 The rimseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "rimseg/conv2d.hpp"
#include "rimseg/experiments.hpp"
#include "rimseg/image.hpp"
#include "rimseg/image_io.hpp"
#include "rimseg/label_io.hpp"
#include "rimseg/label_map.hpp"
#include "rimseg/metrics.hpp"
#include "rimseg/nn.hpp"
#include "rimseg/normalize.hpp"
#include "rimseg/objective.hpp"
#include "rimseg/ops.hpp"
#include "rimseg/records.hpp"
#include "rimseg/segmenter.hpp"
#include "rimseg/slic.hpp"
#include "rimseg/tensor.hpp"
