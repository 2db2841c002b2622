#include "covq/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "covq/rng.hpp"

namespace covq {

namespace {

constexpr char kMagic[4] = {'C', 'B', 'Q', 'N'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

void put_u64(std::string& out, uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw IoError("checkpoint truncated");
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

void append_record(std::string& out, const std::string& name, const std::vector<int>& shape,
                   const float* data) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<uint32_t>(shape.size()));
    int64_t numel = 1;
    for (int d : shape) {
        put_u32(out, static_cast<uint32_t>(d));
        numel *= d;
    }
    out.append(reinterpret_cast<const char*>(data), static_cast<size_t>(numel) * sizeof(float));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

std::string verified_body(const std::string& path) {
    const std::string buf = read_file(path);
    if (buf.size() < 4 + 4 + 8 || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw IoError("'" + path + "' is not a CBQN checkpoint");
    }
    uint64_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
    const uint64_t actual = fnv1a64(buf.data(), buf.size() - 8);
    if (stored != actual) {
        throw ChecksumMismatchError("checkpoint '" + path + "' failed its checksum");
    }
    return buf.substr(0, buf.size() - 8);
}

CheckpointMeta parse_meta(const nlohmann::json& j) {
    CheckpointMeta meta;
    const auto v = variant_from_name(j.at("variant").get<std::string>());
    if (!v) throw IoError("checkpoint has unknown variant tag");
    meta.variant = *v;
    meta.rows = j.at("rows").get<int>();
    meta.cols = j.at("cols").get<int>();
    meta.kernel = j.at("kernel").get<int>();
    meta.conv_channels = j.at("conv_channels").get<int>();
    meta.hidden = j.at("hidden").get<int>();
    meta.actions = j.at("actions").get<int>();
    meta.budget_cap = j.at("budget_cap").get<int>();
    return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, QNetwork<float>& net, int budget_cap) {
    const QNetworkConfig& cfg = net.config();
    nlohmann::json meta = {
        {"variant", variant_name(cfg.variant)},
        {"rows", cfg.rows},
        {"cols", cfg.cols},
        {"kernel", cfg.kernel},
        {"conv_channels", cfg.conv_channels},
        {"hidden", cfg.hidden},
        {"actions", cfg.actions},
        {"budget_cap", budget_cap},
        {"channel_order", kChannelOrder},
        {"scalar", "f32"},
    };
    const std::string meta_str = meta.dump();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(meta_str.size()));
    out.append(meta_str);

    auto params = net.named_params();
    auto buffers = net.named_buffers();
    put_u32(out, static_cast<uint32_t>(params.size() + buffers.size()));
    for (auto& [name, p] : params) append_record(out, name, p->value.shape, p->value.ptr());
    for (auto& [name, b] : buffers) append_record(out, name, b->shape, b->ptr());

    put_u64(out, fnv1a64(out.data(), out.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint '" + path + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to checkpoint '" + path + "'");
}

CheckpointMeta peek_checkpoint(const std::string& path) {
    const std::string body = verified_body(path);
    Reader r{body, 4};
    const uint32_t version = r.u32();
    if (version != kVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    const uint32_t meta_len = r.u32();
    const std::string meta_str = r.bytes(meta_len);
    return parse_meta(nlohmann::json::parse(meta_str));
}

CheckpointMeta load_checkpoint(const std::string& path, QNetwork<float>& net) {
    const std::string body = verified_body(path);
    Reader r{body, 4};
    if (r.u32() != kVersion) throw IoError("unsupported checkpoint version");
    const uint32_t meta_len = r.u32();
    const CheckpointMeta meta = parse_meta(nlohmann::json::parse(r.bytes(meta_len)));
    if (meta.variant != net.variant()) {
        throw VariantMismatchError(std::string("checkpoint variant '") +
                                   variant_name(meta.variant) + "' does not match network '" +
                                   variant_name(net.variant()) + "'");
    }

    std::vector<std::pair<std::string, nn::Tensor<float>*>> slots;
    for (auto& [name, p] : net.named_params()) slots.emplace_back(name, &p->value);
    for (auto& [name, b] : net.named_buffers()) slots.emplace_back(name, b);

    const uint32_t count = r.u32();
    if (count != slots.size()) {
        throw IoError("checkpoint holds " + std::to_string(count) + " tensors, network expects " +
                      std::to_string(slots.size()));
    }
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = r.u32();
        const std::string name = r.bytes(name_len);
        const uint32_t rank = r.u32();
        std::vector<int> shape(rank);
        int64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(r.u32());
            numel *= shape[d];
        }
        if (name != slots[i].first || shape != slots[i].second->shape) {
            throw IoError("checkpoint tensor '" + name + "' does not match network tensor '" +
                          slots[i].first + "'");
        }
        const std::string raw = r.bytes(static_cast<size_t>(numel) * sizeof(float));
        std::memcpy(slots[i].second->ptr(), raw.data(), raw.size());
    }
    return meta;
}

std::pair<QNetwork<float>, CheckpointMeta> load_checkpoint_network(const std::string& path) {
    const CheckpointMeta meta = peek_checkpoint(path);
    Rng rng(0);
    QNetwork<float> net(meta.network_config(), rng);
    load_checkpoint(path, net);
    return {std::move(net), meta};
}

}  // namespace covq
