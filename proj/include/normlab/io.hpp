#pragma once

#include <string>

#include <json.hpp>

#include "normlab/emd.hpp"
#include "normlab/harness.hpp"
#include "normlab/poincare.hpp"
#include "normlab/sketch.hpp"
#include "normlab/spaces.hpp"

namespace normlab {

using json = nlohmann::json;

// Readers validate shape and reject non-finite numbers; malformed
// documents raise validation_error with a one-line reason.

json parse_json_text(const std::string& text, const std::string& what);
json load_json_file(const std::string& path);

Vector vector_from_json(const json& j);          // {"coords": [...]} or a bare array
json vector_to_json(const Vector& v);

Matrix matrix_from_json(const json& j);          // {"rows": r, "cols": c, "entries": [...]}
json matrix_to_json(const Matrix& m);

FiniteMetric metric_from_json(const json& j);    // {"n": k, "d": [[...], ...]}
json metric_to_json(const FiniteMetric& x);

GridMeasure measure_from_json(const json& j);    // {"n": k, "cells": [{"x","y","w"}, ...]}
SignedGridMeasure signed_measure_from_json(const json& j);
json measure_to_json(const GridMeasure& m);
json measure_to_json(const SignedGridMeasure& m);

json plan_to_json(const TransportPlan& plan);

SketchVector sketch_from_json(const json& j);    // {"fingerprint": "0x...", "values": [...]}
json sketch_to_json(const SketchVector& s);

json report_to_json(const ExperimentReport& rep);
json distortion_to_json(const DistortionReport& rep);
std::string distortion_csv(const DistortionReport& rep);
std::string trace_gap_csv(const std::vector<TraceGapRow>& rows);
json trace_gap_to_json(const std::vector<TraceGapRow>& rows);

json witness_to_json(const PoincareWitness& w, const PairSpace& ps);
json threshold_result_to_json(const ThresholdMapResult& res, const PairSpace& ps);

// Writes via a temporary file in the same directory, then renames, so
// readers never observe a half-written file.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace normlab
