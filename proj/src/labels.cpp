#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "batchmos/data.hpp"
#include "batchmos/errors.hpp"
#include "batchmos/random.hpp"
#include "binary_io.hpp"

namespace batchmos::data {

std::string_view split_name(Split split) noexcept {
    switch (split) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        case Split::TestMain: return "test-main";
        case Split::TestOther1: return "test-other1";
    }
    return "unknown";
}

std::optional<Split> parse_split(std::string_view token) noexcept {
    for (Split s : kAllSplits) {
        if (split_name(s) == token) return s;
    }
    return std::nullopt;
}

namespace {

constexpr std::string_view kHeader = "clip_id,mos,split";

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

std::vector<ClipLabel> parse_labels(std::string_view text) {
    std::vector<ClipLabel> labels;
    std::unordered_set<std::string> seen;
    std::size_t row = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++row;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (!header_seen) {
            if (line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
            if (line != kHeader) throw ValidationError("expected header '" + std::string(kHeader) + "'", row);
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;

        const auto fields = split_fields(line);
        if (fields.size() != 3) throw ValidationError("expected 3 fields, got " + std::to_string(fields.size()), row);
        if (fields[0].empty()) throw ValidationError("empty clip_id", row);

        double mos = 0.0;
        const auto [end, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), mos);
        if (ec != std::errc() || end != fields[1].data() + fields[1].size() || !std::isfinite(mos)) {
            throw ValidationError("mos '" + std::string(fields[1]) + "' is not a number", row);
        }
        if (mos < 1.0 || mos > 5.0) throw ValidationError("mos " + std::string(fields[1]) + " outside [1, 5]", row);

        const auto split = parse_split(fields[2]);
        if (!split) throw ValidationError("unknown split '" + std::string(fields[2]) + "'", row);

        std::string id(fields[0]);
        if (!seen.insert(id).second) throw ValidationError("duplicate clip_id '" + id + "'", row);
        labels.push_back({std::move(id), mos, *split});
    }
    if (!header_seen) throw ValidationError("missing header", 1);
    return labels;
}

std::vector<ClipLabel> load_labels(const std::filesystem::path& path) {
    const std::vector<char> bytes = detail::read_file(path);
    try {
        return parse_labels(std::string_view(bytes.data(), bytes.size()));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what(), e.row());
    }
}

std::string format_labels(std::span<const ClipLabel> labels) {
    std::string out(kHeader);
    out += '\n';
    char buf[64];
    for (const ClipLabel& l : labels) {
        const auto res = std::to_chars(buf, buf + sizeof buf, l.mos);
        out += l.clip_id;
        out += ',';
        out.append(buf, res.ptr);
        out += ',';
        out += split_name(l.split);
        out += '\n';
    }
    return out;
}

void write_labels(std::span<const ClipLabel> labels, const std::filesystem::path& path) {
    const std::string text = format_labels(labels);
    detail::write_file_atomic(path, std::vector<char>(text.begin(), text.end()));
}

std::vector<ClipLabel> labels_in(std::span<const ClipLabel> labels, Split split) {
    std::vector<ClipLabel> out;
    for (const ClipLabel& l : labels) {
        if (l.split == split) out.push_back(l);
    }
    return out;
}

std::vector<std::vector<std::string>> make_batches(std::span<const std::string> clip_ids, std::uint64_t seed,
                                                   std::size_t batch_size, std::uint64_t epoch) {
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (clip_ids.empty()) throw DataConsistencyError("cannot batch an empty train set");
    std::vector<std::string> order(clip_ids.begin(), clip_ids.end());
    Rng rng(mix_seed(seed, epoch));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(order[i], order[j]);
    }
    std::vector<std::vector<std::string>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        batches.emplace_back(std::make_move_iterator(order.begin() + static_cast<std::ptrdiff_t>(start)),
                             std::make_move_iterator(order.begin() + static_cast<std::ptrdiff_t>(end)));
    }
    return batches;
}

SynthData synth_generate(std::uint64_t seed, std::uint32_t dim_a, std::uint32_t dim_b, const SynthCounts& counts,
                         double noise_sd) {
    if (counts.train == 0 || counts.dev == 0 || counts.test_main == 0 || counts.test_other1 == 0) {
        throw ConfigError("synth: every split needs at least one clip");
    }
    if (!(noise_sd >= 0.0)) throw ConfigError("synth: noise_sd must be non-negative");

    Rng rng(mix_seed(seed, 0x53594E));
    std::vector<double> w_a(dim_a), w_b(dim_b);
    for (double& w : w_a) w = rng.gaussian();
    for (double& w : w_b) w = rng.gaussian();

    SynthData out{EmbeddingTable("synth_a", dim_a), EmbeddingTable("synth_b", dim_b), {}};
    const std::array<std::pair<Split, std::size_t>, 4> plan = {{{Split::Train, counts.train},
                                                                {Split::Dev, counts.dev},
                                                                {Split::TestMain, counts.test_main},
                                                                {Split::TestOther1, counts.test_other1}}};
    std::size_t serial = 0;
    char id[32];
    for (const auto& [split, n] : plan) {
        for (std::size_t k = 0; k < n; ++k) {
            std::snprintf(id, sizeof id, "clip_%05zu", ++serial);
            const double q = rng.uniform(1.0, 5.0);
            const double mos = std::clamp(q + noise_sd * rng.gaussian(), 1.0, 5.0);
            std::vector<float> va(dim_a), vb(dim_b);
            for (std::size_t j = 0; j < dim_a; ++j) va[j] = static_cast<float>(w_a[j] * q + noise_sd * rng.gaussian());
            for (std::size_t j = 0; j < dim_b; ++j) vb[j] = static_cast<float>(w_b[j] * q + noise_sd * rng.gaussian());
            out.a.add(id, std::move(va));
            out.b.add(id, std::move(vb));
            out.labels.push_back({id, mos, split});
        }
    }
    return out;
}

}  // namespace batchmos::data
