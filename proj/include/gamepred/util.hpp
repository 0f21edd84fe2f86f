#pragma once

#include <string>
#include <string_view>

namespace gamepred {

// Hex-encoded SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::string read_text_file(const std::string& path);

// Writes via a temporary file in the same directory followed by a rename, so
// concurrent readers never observe a partial file.
void write_text_file_atomic(const std::string& path, std::string_view content);

void ensure_directory(const std::string& path);

} // namespace gamepred
