#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace aif {

// Reads the whole file as bytes. Throws SchemaError if unreadable.
std::string read_text_file(const std::filesystem::path& path);

// Splits on '\n', dropping a trailing '\r' from each line and a final
// empty line caused by a terminating newline.
std::vector<std::string> split_lines(const std::string& text);

// Writes atomically: temp file in the same directory, then rename.
// Creates parent directories as needed.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace aif
