// Copyright 2026 The qmeas Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "qmeas/channels.hpp"
#include "qmeas/circuit.hpp"
#include "qmeas/error.hpp"
#include "qmeas/linalg.hpp"
#include "qmeas/measure.hpp"
#include "qmeas/qec.hpp"
#include "qmeas/random.hpp"
#include "qmeas/states.hpp"
