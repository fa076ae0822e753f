#include "starsent/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "starsent/hash.hpp"

namespace starsent::model {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "weight files assume a little-endian host");

namespace {

constexpr char kMagic[5] = {'S', 'T', 'S', 'F', '1'};

void append_u32(std::string& out, uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

void append_u64(std::string& out, uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

}  // namespace

void save_weights(const WeightBundle& w, const std::string& path, WeightDType dtype,
                  const json& metadata) {
    const size_t elem = dtype == WeightDType::f32 ? 4 : 8;
    json header;
    header["dtype"] = dtype == WeightDType::f32 ? "f32" : "f64";
    if (!metadata.is_null()) header["meta"] = metadata;
    json arrays = json::array();
    std::string payload;
    for (const auto& [name, array] : w.arrays) {
        json entry;
        entry["name"] = name;
        entry["shape"] = array.shape;
        entry["offset"] = payload.size();
        arrays.push_back(entry);
        const size_t start = payload.size();
        payload.resize(start + array.size() * elem);
        if (dtype == WeightDType::f32) {
            for (size_t i = 0; i < array.size(); ++i) {
                const float f = static_cast<float>(array.data[i]);
                std::memcpy(payload.data() + start + i * 4, &f, 4);
            }
        } else {
            std::memcpy(payload.data() + start, array.data.data(), array.size() * 8);
        }
    }
    header["arrays"] = arrays;
    header["payload_bytes"] = payload.size();

    std::string blob;
    blob.append(kMagic, sizeof(kMagic));
    const std::string header_str = header.dump();
    append_u32(blob, static_cast<uint32_t>(header_str.size()));
    blob += header_str;
    blob += payload;
    append_u64(blob, fnv1a64(payload));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

WeightBundle load_weights_unchecked(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (blob.size() < sizeof(kMagic) + 4 ||
        std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error(path + ": bad magic, not a weight file");
    }
    uint32_t header_len = 0;
    std::memcpy(&header_len, blob.data() + sizeof(kMagic), 4);
    const size_t header_start = sizeof(kMagic) + 4;
    if (blob.size() < header_start + header_len) {
        throw std::runtime_error(path + ": truncated header");
    }
    json header;
    try {
        header = json::parse(blob.substr(header_start, header_len));
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": corrupt header: " + e.what());
    }
    const std::string dtype = header.at("dtype").get<std::string>();
    if (dtype != "f32" && dtype != "f64") {
        throw std::runtime_error(path + ": unknown dtype " + dtype);
    }
    const size_t elem = dtype == "f32" ? 4 : 8;
    const size_t payload_bytes = header.at("payload_bytes").get<size_t>();
    const size_t payload_start = header_start + header_len;
    if (blob.size() != payload_start + payload_bytes + 8) {
        throw std::runtime_error(path + ": truncated or oversized payload");
    }
    const std::string_view payload(blob.data() + payload_start, payload_bytes);
    uint64_t stored_checksum = 0;
    std::memcpy(&stored_checksum, blob.data() + payload_start + payload_bytes, 8);
    if (fnv1a64(payload) != stored_checksum) {
        throw std::runtime_error(path + ": checksum mismatch, file is corrupt");
    }

    WeightBundle w;
    for (const auto& entry : header.at("arrays")) {
        const std::string name = entry.at("name").get<std::string>();
        Array a(entry.at("shape").get<std::vector<size_t>>());
        const size_t offset = entry.at("offset").get<size_t>();
        if (offset + a.size() * elem > payload_bytes) {
            throw std::runtime_error(path + ": array " + name + " overruns the payload");
        }
        if (dtype == "f32") {
            for (size_t i = 0; i < a.size(); ++i) {
                float f;
                std::memcpy(&f, payload.data() + offset + i * 4, 4);
                a.data[i] = static_cast<double>(f);
            }
        } else {
            std::memcpy(a.data.data(), payload.data() + offset, a.size() * 8);
        }
        if (!w.arrays.emplace(name, std::move(a)).second) {
            throw std::runtime_error(path + ": duplicate array " + name);
        }
    }
    return w;
}

WeightBundle load_weights(const std::string& path, const ModelConfig& cfg) {
    WeightBundle w = load_weights_unchecked(path);
    validate_weights(w, cfg);
    return w;
}

json load_metadata(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[sizeof(kMagic)];
    uint32_t header_len = 0;
    if (!in.read(magic, sizeof(kMagic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error(path + ": bad magic, not a weight file");
    }
    if (!in.read(reinterpret_cast<char*>(&header_len), 4)) {
        throw std::runtime_error(path + ": truncated header");
    }
    std::string header_str(header_len, '\0');
    if (!in.read(header_str.data(), header_len)) {
        throw std::runtime_error(path + ": truncated header");
    }
    const json header = json::parse(header_str);
    return header.contains("meta") ? header.at("meta") : json(nullptr);
}

}  // namespace starsent::model
