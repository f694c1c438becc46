// Copyright 2026 The tractdiff Authors. All Rights Reserved.
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

#include "tractdiff/error.h"

namespace tractdiff {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kBadArgument: return "BadArgument";
    case ErrorKind::kUnreadableMedia: return "UnreadableMedia";
    case ErrorKind::kDurationMismatch: return "DurationMismatch";
    case ErrorKind::kEmptyRecording: return "EmptyRecording";
    case ErrorKind::kAlignmentGap: return "AlignmentGap";
    case ErrorKind::kInsufficientSpeakers: return "InsufficientSpeakers";
    case ErrorKind::kEncoderFailure: return "EncoderFailure";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kEmptyWindow: return "EmptyWindow";
    case ErrorKind::kOutOfRange: return "OutOfRange";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kImageTooSmall: return "ImageTooSmall";
    case ErrorKind::kTooFewSamples: return "TooFewSamples";
    case ErrorKind::kNonFiniteResult: return "NonFiniteResult";
    case ErrorKind::kMissingWordClass: return "MissingWordClass";
    case ErrorKind::kDuplicateRating: return "DuplicateRating";
    case ErrorKind::kInvalidScore: return "InvalidScore";
    case ErrorKind::kUnknownItem: return "UnknownItem";
    case ErrorKind::kNoRatings: return "NoRatings";
    case ErrorKind::kEmptyAudio: return "EmptyAudio";
    case ErrorKind::kConfigMismatch: return "ConfigMismatch";
    case ErrorKind::kLoadError: return "LoadError";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
      kind_(kind) {}

void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace tractdiff
