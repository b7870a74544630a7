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

#include "cbl/idx.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cbl {

namespace {

std::uint32_t read_u32_be(std::istream& in, const std::string& path, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("idx: truncated file " + path + " while reading " + what);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>((v >> 24) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>(v & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

[[noreturn]] void bad_magic(std::uint32_t expected, std::uint32_t observed,
                            const std::string& path) {
    std::ostringstream msg;
    msg << "idx: bad magic in " << path << ": expected 0x" << std::hex << expected << ", got 0x"
        << observed;
    throw std::runtime_error(msg.str());
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::uint64_t n_bytes,
                                       const std::string& path) {
    std::vector<std::uint8_t> bytes(n_bytes);
    if (n_bytes > 0 && !in.read(reinterpret_cast<char*>(bytes.data()),
                                static_cast<std::streamsize>(n_bytes)))
        throw std::runtime_error("idx: truncated file " + path + " (payload shorter than header)");
    // A well-formed file ends exactly at the payload.
    char extra;
    if (in.read(&extra, 1))
        throw std::runtime_error("idx: trailing bytes after payload in " + path);
    return bytes;
}

}  // namespace

IdxImages load_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + path);

    const std::uint32_t magic = read_u32_be(in, path, "magic");
    if (magic != kIdxImageMagic) bad_magic(kIdxImageMagic, magic, path);

    IdxImages images;
    images.count = read_u32_be(in, path, "image count");
    images.rows = read_u32_be(in, path, "row count");
    images.cols = read_u32_be(in, path, "column count");

    const std::uint64_t per_image =
        static_cast<std::uint64_t>(images.rows) * static_cast<std::uint64_t>(images.cols);
    const std::uint64_t total = per_image * static_cast<std::uint64_t>(images.count);
    constexpr std::uint64_t kMaxPayload = 1ULL << 32;
    if (per_image == 0 || total > kMaxPayload)
        throw std::runtime_error("idx: dimension overflow in " + path + " (" +
                                 std::to_string(images.count) + " x " +
                                 std::to_string(images.rows) + " x " +
                                 std::to_string(images.cols) + ")");

    images.pixels = read_payload(in, total, path);
    images.unit_vectors.reserve(images.count);
    for (std::uint32_t i = 0; i < images.count; ++i) {
        Eigen::VectorXd v(per_image);
        for (std::uint64_t p = 0; p < per_image; ++p)
            v[static_cast<Eigen::Index>(p)] = static_cast<double>(images.pixels[i * per_image + p]);
        const double norm = v.norm();
        if (norm == 0.0)
            throw std::runtime_error("idx: all-zero image " + std::to_string(i) + " in " + path +
                                     " cannot be unit-normalized");
        images.unit_vectors.push_back(v / norm);
    }
    return images;
}

IdxLabels load_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + path);

    const std::uint32_t magic = read_u32_be(in, path, "magic");
    if (magic != kIdxLabelMagic) bad_magic(kIdxLabelMagic, magic, path);

    const std::uint32_t count = read_u32_be(in, path, "label count");
    IdxLabels labels;
    labels.labels = read_payload(in, count, path);
    return labels;
}

void write_idx_images(const std::string& path, std::uint32_t rows, std::uint32_t cols,
                      const std::vector<std::uint8_t>& pixels) {
    const std::uint64_t per_image = static_cast<std::uint64_t>(rows) * cols;
    if (per_image == 0 || pixels.size() % per_image != 0)
        throw std::invalid_argument("write_idx_images: pixel count not a multiple of rows*cols");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_idx_images: cannot open " + path);
    write_u32_be(out, kIdxImageMagic);
    write_u32_be(out, static_cast<std::uint32_t>(pixels.size() / per_image));
    write_u32_be(out, rows);
    write_u32_be(out, cols);
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw std::runtime_error("write_idx_images: write failed for " + path);
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_idx_labels: cannot open " + path);
    write_u32_be(out, kIdxLabelMagic);
    write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    if (!out) throw std::runtime_error("write_idx_labels: write failed for " + path);
}

}  // namespace cbl
