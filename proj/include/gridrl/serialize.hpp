#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridrl/types.hpp"

namespace gridrl {

inline constexpr int kSchemaVersion = 1;

// Line-delimited record container: one JSON object per line with fields
// {schema_version, record_type, payload}.
struct Record {
    std::string type;
    nlohmann::json payload;
};

std::string record_line(const std::string& type, const nlohmann::json& payload);
Record parse_record_line(const std::string& line);

class RecordWriter {
public:
    explicit RecordWriter(const std::string& path);  // throws IoError
    ~RecordWriter();
    RecordWriter(const RecordWriter&) = delete;
    RecordWriter& operator=(const RecordWriter&) = delete;

    void write(const std::string& type, const nlohmann::json& payload);
    void close();

private:
    struct Impl;
    Impl* impl_;
};

// Streams every record in the file through the callback; throws IoError on
// unreadable files and ValidationError on malformed lines.
void read_records(const std::string& path,
                  const std::function<void(const Record&)>& fn);
std::vector<Record> read_all_records(const std::string& path);

// JSON conversions for the domain types.
void to_json(nlohmann::json& j, const SceneObject& o);
void from_json(const nlohmann::json& j, SceneObject& o);
void to_json(nlohmann::json& j, const SceneRelation& r);
void from_json(const nlohmann::json& j, SceneRelation& r);
void to_json(nlohmann::json& j, const PromptSpec& p);
void from_json(const nlohmann::json& j, PromptSpec& p);
void to_json(nlohmann::json& j, const TokenGrid& g);
void from_json(const nlohmann::json& j, TokenGrid& g);
void to_json(nlohmann::json& j, const PairedRecord& r);
void from_json(const nlohmann::json& j, PairedRecord& r);
void to_json(nlohmann::json& j, const VocabSpec& v);
void from_json(const nlohmann::json& j, VocabSpec& v);

// Hex digest of a file's bytes (fnv1a64); empty file is valid, missing file
// throws IoError.
std::string file_digest(const std::string& path);
std::string digest_hex(uint64_t h);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace gridrl
