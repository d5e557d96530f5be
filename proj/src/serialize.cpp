#include "gridrl/serialize.hpp"

#include <fstream>
#include <sstream>

#include "gridrl/errors.hpp"
#include "gridrl/rng.hpp"

namespace gridrl {

using nlohmann::json;

std::string record_line(const std::string& type, const json& payload) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["record_type"] = type;
    j["payload"] = payload;
    return j.dump();
}

Record parse_record_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed record line: ") + e.what());
    }
    if (!j.contains("schema_version") || !j.contains("record_type") || !j.contains("payload")) {
        throw ValidationError("record line missing required fields");
    }
    if (j["schema_version"].get<int>() != kSchemaVersion) {
        throw ValidationError("unsupported schema version");
    }
    return Record{j["record_type"].get<std::string>(), j["payload"]};
}

struct RecordWriter::Impl {
    std::ofstream out;
};

RecordWriter::RecordWriter(const std::string& path) : impl_(new Impl) {
    impl_->out.open(path, std::ios::binary | std::ios::trunc);
    if (!impl_->out) {
        delete impl_;
        throw IoError("cannot open for writing: " + path);
    }
}

RecordWriter::~RecordWriter() { delete impl_; }

void RecordWriter::write(const std::string& type, const json& payload) {
    impl_->out << record_line(type, payload) << '\n';
    if (!impl_->out) throw IoError("record write failed");
}

void RecordWriter::close() {
    impl_->out.close();
    if (impl_->out.fail()) throw IoError("record file close failed");
}

void read_records(const std::string& path, const std::function<void(const Record&)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        fn(parse_record_line(line));
    }
}

std::vector<Record> read_all_records(const std::string& path) {
    std::vector<Record> out;
    read_records(path, [&](const Record& r) { out.push_back(r); });
    return out;
}

void to_json(json& j, const SceneObject& o) {
    j = json{{"shape", to_string(o.shape)}, {"color", to_string(o.color)}, {"count", o.count}};
}

void from_json(const json& j, SceneObject& o) {
    o.shape = shape_from_string(j.at("shape").get<std::string>());
    o.color = color_from_string(j.at("color").get<std::string>());
    o.count = j.at("count").get<int>();
}

void to_json(json& j, const SceneRelation& r) {
    j = json{{"subject", r.subject}, {"relation", to_string(r.kind)}, {"object", r.object}};
}

void from_json(const json& j, SceneRelation& r) {
    r.subject = j.at("subject").get<int>();
    r.kind = relation_from_string(j.at("relation").get<std::string>());
    r.object = j.at("object").get<int>();
}

void to_json(json& j, const PromptSpec& p) {
    j = json{{"objects", p.objects},
             {"relations", p.relations},
             {"category", to_string(p.category)},
             {"surface_text", p.surface_text},
             {"prompt_tokens", p.prompt_tokens}};
}

void from_json(const json& j, PromptSpec& p) {
    p.objects = j.at("objects").get<std::vector<SceneObject>>();
    p.relations = j.at("relations").get<std::vector<SceneRelation>>();
    p.category = category_from_string(j.at("category").get<std::string>());
    p.surface_text = j.at("surface_text").get<std::string>();
    p.prompt_tokens = j.at("prompt_tokens").get<std::vector<int>>();
}

void to_json(json& j, const TokenGrid& g) {
    j = json{{"height", g.height}, {"width", g.width}, {"tokens", g.tokens}};
}

void from_json(const json& j, TokenGrid& g) {
    g.height = j.at("height").get<int>();
    g.width = j.at("width").get<int>();
    g.tokens = j.at("tokens").get<std::vector<int>>();
}

void to_json(json& j, const PairedRecord& r) {
    j = json{{"prompt_1", r.prompt_1}, {"grid_1", r.grid_1},   {"prompt_2", r.prompt_2},
             {"grid_2", r.grid_2},     {"category", to_string(r.category)}, {"verified", r.verified}};
}

void from_json(const json& j, PairedRecord& r) {
    r.prompt_1 = j.at("prompt_1").get<PromptSpec>();
    r.grid_1 = j.at("grid_1").get<TokenGrid>();
    r.prompt_2 = j.at("prompt_2").get<PromptSpec>();
    r.grid_2 = j.at("grid_2").get<TokenGrid>();
    r.category = category_from_string(j.at("category").get<std::string>());
    r.verified = j.at("verified").get<bool>();
}

void to_json(json& j, const VocabSpec& v) {
    j = json{{"grid_height", v.grid_height},
             {"grid_width", v.grid_width},
             {"shapes", json::array({"circle", "square", "triangle"})},
             {"colors", json::array({"red", "green", "blue", "yellow", "purple"})}};
}

void from_json(const json& j, VocabSpec& v) {
    v.grid_height = j.at("grid_height").get<int>();
    v.grid_width = j.at("grid_width").get<int>();
}

std::string digest_hex(uint64_t h) {
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = hex[h & 0xf];
        h >>= 4;
    }
    return out;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for digest: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return digest_hex(fnv1a64(ss.str()));
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace gridrl
