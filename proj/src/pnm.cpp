// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/pnm.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "protomask/errors.hpp"

namespace protomask {

namespace {

void write_pnm(const std::filesystem::path& path, const Image8& image, int channels, const char* magic) {
  if (image.channels != channels) {
    throw FormatError(path.string() + ": image has " + std::to_string(image.channels) +
                      " channels, format needs " + std::to_string(channels));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << magic << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

// Next whitespace-separated header token, skipping '#' comments.
std::string next_token(std::istream& in, const std::string& context) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  if (token.empty()) throw FormatError(context + ": truncated header");
  return token;
}

int header_int(std::istream& in, const std::string& context, const char* field) {
  const std::string token = next_token(in, context);
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size() || v <= 0) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw FormatError(context + ": invalid " + field + " '" + token + "'");
  }
}

Image8 read_pnm(const std::filesystem::path& path, int channels, const char* magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string context = path.filename().string();
  if (next_token(in, context) != magic) {
    throw FormatError(context + ": expected magic " + std::string(magic));
  }
  const int width = header_int(in, context, "width");
  const int height = header_int(in, context, "height");
  if (header_int(in, context, "maxval") != 255) throw FormatError(context + ": maxval must be 255");
  // next_token consumed exactly one whitespace byte after maxval.
  Image8 image(width, height, channels);
  in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != image.pixels.size()) {
    throw FormatError(context + ": pixel data truncated");
  }
  return image;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Image8& image) { write_pnm(path, image, 1, "P5"); }
void write_ppm(const std::filesystem::path& path, const Image8& image) { write_pnm(path, image, 3, "P6"); }
Image8 read_pgm(const std::filesystem::path& path) { return read_pnm(path, 1, "P5"); }
Image8 read_ppm(const std::filesystem::path& path) { return read_pnm(path, 3, "P6"); }

}  // namespace protomask
