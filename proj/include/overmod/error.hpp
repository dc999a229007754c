// Copyright 2026 The Overmod Lab Authors
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

#ifndef OVERMOD_ERROR_HPP_
#define OVERMOD_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace overmod {

// Shapes, dimensions or hyperparameters that do not fit together.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller-supplied data outside the accepted domain (token ids, conditions).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scene or game constraints that cannot be satisfied.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures; the message always carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss became NaN or infinite during training.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t batch, double loss)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch) +
                           ", loss " + std::to_string(loss)),
        epoch_(epoch),
        batch_(batch),
        loss_(loss) {}

  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }
  double loss() const { return loss_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
  double loss_;
};

}  // namespace overmod

#endif  // OVERMOD_ERROR_HPP_
