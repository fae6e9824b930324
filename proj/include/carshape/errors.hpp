/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/errors.hpp
 *
 * Copyright 2026 The carshape authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace carshape {

/// Input violates a mathematical precondition (zero quaternion, empty set, ...).
struct DegenerateInputError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// A point required to be in front of the camera has nonpositive depth.
struct BehindCameraError : std::domain_error
{
    using std::domain_error::domain_error;
};

/// Fewer usable observations than the solver needs.
struct TooFewPointsError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// Observation geometry is degenerate (e.g. collinear 3D points).
struct DegenerateConfigError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// A metric was requested on an empty evaluation set.
struct UndefinedMetricError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// A structured file does not match the documented schema.
struct SchemaError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

} // namespace carshape
