// Copyright 2026 The FedCL Authors. All Rights Reserved.
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

// Plain-text dataset format:
//
//   # dim=<d> classes=<c>
//   f_0,f_1,...,f_{d-1},label
//   ...

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fedcl/data.hpp"
#include "fedcl/error.hpp"

namespace fedcl {

class DatasetFormatError : public Error {
 public:
  DatasetFormatError(std::size_t line, const std::string& what)
      : Error("dataset line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline void write_dataset(std::ostream& os, const Dataset& data) {
  os << "# dim=" << data.feature_dim() << " classes=" << data.class_count() << '\n';
  char buf[32];
  for (const Sample& s : data) {
    for (double x : s.features) {
      // Shortest representation that parses back to the same double.
      auto res = std::to_chars(buf, buf + sizeof buf, x);
      os.write(buf, res.ptr - buf);
      os << ',';
    }
    os << s.label << '\n';
  }
}

inline Dataset read_dataset(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0, classes = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (std::sscanf(line.c_str(), "# dim=%zu classes=%zu", &dim, &classes) != 2 || dim == 0 || classes == 0)
      throw DatasetFormatError(lineno, "expected header '# dim=<d> classes=<c>'");
    break;
  }
  if (dim == 0) throw DatasetFormatError(lineno, "missing header");
  Dataset out(classes, dim);
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() != dim + 1)
      throw DatasetFormatError(lineno, "expected " + std::to_string(dim + 1) + " fields, got " +
                                           std::to_string(fields.size()));
    Sample s{std::vector<double>(dim), 0};
    for (std::size_t i = 0; i < dim; ++i) {
      const std::string& f = fields[i];
      auto res = std::from_chars(f.data(), f.data() + f.size(), s.features[i]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw DatasetFormatError(lineno, "bad feature value '" + f + "'");
    }
    const std::string& lf = fields.back();
    auto res = std::from_chars(lf.data(), lf.data() + lf.size(), s.label);
    if (res.ec != std::errc() || res.ptr != lf.data() + lf.size() || s.label >= classes)
      throw DatasetFormatError(lineno, "bad label '" + lf + "'");
    out.add(std::move(s));
  }
  return out;
}

}  // namespace fedcl
