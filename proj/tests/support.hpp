/*
 * Copyright 2026 The byovla Authors.
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

// Shared helpers for the unit tests.
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "doctest.h"

#include "byovla/core.hpp"
#include "byovla/errors.hpp"

namespace byovla::test {

#define CHECK_THROWS_CODE(expr, expected)                                 \
  do {                                                                    \
    bool threw_ = false;                                                  \
    try {                                                                 \
      (void)(expr);                                                       \
    } catch (const ::byovla::Error& e_) {                                 \
      threw_ = true;                                                      \
      CHECK_MESSAGE(e_.code() == (expected), "got " << to_string(e_.code())); \
    }                                                                     \
    CHECK_MESSAGE(threw_, "no byovla::Error thrown by " #expr);          \
  } while (0)

inline Bitmap random_bitmap(std::mt19937_64& gen, int w, int h, double p) {
  std::bernoulli_distribution coin(p);
  Bitmap b(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) b(y, x) = coin(gen);
  return b;
}

inline Image random_image(std::mt19937_64& gen, int w, int h) {
  std::uniform_int_distribution<int> byte(0, 255);
  Image img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(byte(gen));
  return img;
}

inline Bitmap rect_bitmap(int w, int h, int x0, int y0, int x1, int y1) {
  Bitmap b = Bitmap::Constant(h, w, false);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) b(y, x) = true;
  return b;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int n = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("byovla_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace byovla::test
