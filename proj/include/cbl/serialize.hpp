/*
 * Copyright 2026 The cblab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace cbl::detail {

// All integers little-endian regardless of host order.

inline void write_u8(std::ostream& out, std::uint8_t v) {
    out.put(static_cast<char>(v));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

inline void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(b, 8);
}

inline void write_magic(std::ostream& out, const char magic[5]) {
    out.write(magic, 4);
}

inline std::uint8_t read_u8(std::istream& in, const std::string& path) {
    char c;
    if (!in.get(c)) throw std::runtime_error("truncated file: " + path);
    return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
    char b[4];
    if (!in.read(b, 4)) throw std::runtime_error("truncated file: " + path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

inline double read_f64(std::istream& in, const std::string& path) {
    char b[8];
    if (!in.read(b, 8)) throw std::runtime_error("truncated file: " + path);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void expect_magic(std::istream& in, const char magic[5], const std::string& path) {
    char b[4];
    if (!in.read(b, 4)) throw std::runtime_error("truncated file: " + path);
    if (std::memcmp(b, magic, 4) != 0)
        throw std::runtime_error("bad magic in " + path + ": expected \"" + magic + "\", got \"" +
                                 std::string(b, 4) + "\"");
}

}  // namespace cbl::detail
