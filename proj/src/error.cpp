// Copyright 2026 The hamtl Authors.
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

#include "hamtl/error.hpp"

namespace hamtl {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kTooFewRecords: return "TooFewRecords";
    case ErrorCode::kConflictingParent: return "ConflictingParent";
    case ErrorCode::kMissingField: return "MissingField";
    case ErrorCode::kEmptyFile: return "EmptyFile";
    case ErrorCode::kUnknownCity: return "UnknownCity";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonScalarLoss: return "NonScalarLoss";
    case ErrorCode::kDetachedTensor: return "DetachedTensor";
    case ErrorCode::kInvalidRate: return "InvalidRate";
    case ErrorCode::kIdOutOfRange: return "IdOutOfRange";
    case ErrorCode::kMaskEmpty: return "MaskEmpty";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kVocabMismatch: return "VocabMismatch";
    case ErrorCode::kMissingTaskLoss: return "MissingTaskLoss";
    case ErrorCode::kEmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::kEmptyPool: return "EmptyPool";
    case ErrorCode::kEmptySets: return "EmptySets";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyPredictions: return "EmptyPredictions";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace hamtl
