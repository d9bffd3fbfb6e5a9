/*
 * Copyright 2026 The riskboost Authors.
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

#include <stdexcept>
#include <string>

namespace riskboost {

// Base of every error raised by the library. Errors caused by bad inputs,
// files or configuration derive from InputError; broken internal contracts
// (precondition violations by the caller) raise ContractError.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what)
      : Error("contract violation: " + what) {}
};

#define RISKBOOST_DEFINE_INPUT_ERROR(Name, prefix)                 \
  class Name : public InputError {                                 \
   public:                                                         \
    explicit Name(const std::string& what) : InputError(prefix + what) {} \
  };

RISKBOOST_DEFINE_INPUT_ERROR(IngestionError, std::string("ingestion error: "))
RISKBOOST_DEFINE_INPUT_ERROR(SplitError, std::string("split error: "))
RISKBOOST_DEFINE_INPUT_ERROR(SimulationError, std::string("simulation error: "))
RISKBOOST_DEFINE_INPUT_ERROR(SelectionError, std::string("selection error: "))
RISKBOOST_DEFINE_INPUT_ERROR(TrainingError, std::string("training error: "))
RISKBOOST_DEFINE_INPUT_ERROR(ModelIoError, std::string("model load error: "))
RISKBOOST_DEFINE_INPUT_ERROR(TuningError, std::string("tuning error: "))
RISKBOOST_DEFINE_INPUT_ERROR(MetricsError, std::string("metrics error: "))
RISKBOOST_DEFINE_INPUT_ERROR(ExplanationError, std::string("explanation error: "))
RISKBOOST_DEFINE_INPUT_ERROR(AnalysisError, std::string("analysis error: "))
RISKBOOST_DEFINE_INPUT_ERROR(ConfigError, std::string("config error: "))

#undef RISKBOOST_DEFINE_INPUT_ERROR

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractError(what);
}

}  // namespace riskboost
