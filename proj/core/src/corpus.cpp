#include "archboot/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace archboot {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

template <typename T>
T parse_number(const std::string& s, const std::string& path, std::size_t line)
{
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(path, line, "bad number '" + s + "'");
    }
    return value;
}

struct LabelRow {
    Sample sample; // embedding filled in later
    std::string cls;
};

std::vector<LabelRow> read_labels_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open labels file " + path);
    }
    std::string line;
    std::size_t lineno = 0;
    std::vector<LabelRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (lineno == 1) {
            if (line != "id,location_id,tile_x,tile_y,zoom,date,class") {
                throw ParseError(path, 1, "unexpected header '" + line + "'");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != 7) {
            throw ParseError(path, lineno,
                             "expected 7 fields, got " +
                                 std::to_string(fields.size()));
        }
        LabelRow row;
        row.sample.id = fields[0];
        row.sample.location_id = fields[1];
        row.sample.tile.x = parse_number<std::uint32_t>(fields[2], path, lineno);
        row.sample.tile.y = parse_number<std::uint32_t>(fields[3], path, lineno);
        row.sample.tile.zoom = parse_number<int>(fields[4], path, lineno);
        try {
            row.sample.capture_date = Date::parse(fields[5]);
        } catch (const std::invalid_argument& e) {
            throw ParseError(path, lineno, e.what());
        }
        row.cls = fields[6];
        if (row.cls != "task" && row.cls != "background" &&
            row.cls != "unlabeled") {
            throw ParseError(path, lineno, "unknown class '" + row.cls + "'");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_u16le(std::ostream& out, std::uint16_t v)
{
    char buf[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out.write(buf, 2);
}

void write_u32le(std::ostream& out, std::uint32_t v)
{
    char buf[4];
    for (int i = 0; i < 4; ++i) {
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    }
    out.write(buf, 4);
}

std::uint32_t read_u32le(std::istream& in)
{
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    return static_cast<std::uint32_t>(buf[0]) |
           (static_cast<std::uint32_t>(buf[1]) << 8) |
           (static_cast<std::uint32_t>(buf[2]) << 16) |
           (static_cast<std::uint32_t>(buf[3]) << 24);
}

std::uint16_t read_u16le(std::istream& in)
{
    unsigned char buf[2];
    in.read(reinterpret_cast<char*>(buf), 2);
    return static_cast<std::uint16_t>(buf[0] |
                                      (static_cast<std::uint16_t>(buf[1]) << 8));
}

/// Groups rows by location and orders a class group seeds-first. The seed of
/// a location is its latest capture; historical rows follow ordered by
/// (location, date).
HistoryGroup build_group(std::vector<LabelRow*>& rows, ClassTag tag)
{
    std::map<std::string, std::vector<LabelRow*>> by_location;
    for (auto* row : rows) {
        by_location[row->sample.location_id].push_back(row);
    }
    HistoryGroup group;
    group.class_tag = tag;
    std::vector<LabelRow*> historical;
    for (auto& [loc, captures] : by_location) {
        std::sort(captures.begin(), captures.end(),
                  [](const LabelRow* a, const LabelRow* b) {
                      if (a->sample.capture_date != b->sample.capture_date) {
                          return a->sample.capture_date < b->sample.capture_date;
                      }
                      return a->sample.id < b->sample.id;
                  });
        LabelRow* seed = captures.back();
        seed->sample.seed_label = tag;
        group.samples.push_back(std::move(seed->sample));
        for (std::size_t i = 0; i + 1 < captures.size(); ++i) {
            historical.push_back(captures[i]);
        }
    }
    for (auto* row : historical) {
        group.samples.push_back(std::move(row->sample));
    }
    group.alpha.assign(group.samples.size(), 0);
    for (std::size_t i = 0; i < by_location.size(); ++i) {
        group.alpha[i] = 1; // seed entries
    }
    group.conf.assign(group.samples.size(), 0.0);
    return group;
}

} // namespace

const char* to_string(ClassTag tag)
{
    return tag == ClassTag::task ? "task" : "background";
}

ClassTag class_tag_from_string(const std::string& s)
{
    if (s == "task") {
        return ClassTag::task;
    }
    if (s == "background") {
        return ClassTag::background;
    }
    throw std::invalid_argument("unknown class tag '" + s + "'");
}

void HistoryGroup::check_aligned() const
{
    if (samples.size() != alpha.size() || samples.size() != conf.size()) {
        throw std::logic_error("history group arrays misaligned");
    }
    for (auto a : alpha) {
        if (a < 0) {
            throw std::logic_error("negative alpha");
        }
    }
    for (auto c : conf) {
        if (!(c >= 0.0 && c <= 1.0)) {
            throw std::logic_error("confidence outside [0,1]");
        }
    }
}

std::size_t WeightedCorpus::dim() const
{
    if (!task.samples.empty()) {
        return task.samples.front().embedding.size();
    }
    if (!background.samples.empty()) {
        return background.samples.front().embedding.size();
    }
    return 0;
}

std::int64_t sum_alpha(const HistoryGroup& group)
{
    std::int64_t total = 0;
    for (auto a : group.alpha) {
        total += a;
    }
    return total;
}

std::vector<TrainingEntry> effective_training_multiset(const WeightedCorpus& corpus)
{
    std::vector<TrainingEntry> entries;
    auto emit = [&entries](const HistoryGroup& group) {
        for (std::size_t i = 0; i < group.size(); ++i) {
            if (group.alpha[i] >= 1) {
                entries.push_back(
                    {&group.samples[i], group.class_tag, group.alpha[i]});
            }
        }
    };
    emit(corpus.task);
    emit(corpus.background);
    return entries;
}

void write_embeddings(
    const std::string& path, std::uint32_t dim,
    const std::vector<std::pair<std::string, std::vector<float>>>& records)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write embeddings file " + path);
    }
    out.write("AEMB", 4);
    write_u32le(out, dim);
    for (const auto& [id, values] : records) {
        if (values.size() != dim) {
            throw std::invalid_argument("embedding dimension mismatch for id " +
                                        id);
        }
        if (id.size() > 0xffff) {
            throw std::invalid_argument("id too long: " + id);
        }
        write_u16le(out, static_cast<std::uint16_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        static_assert(sizeof(float) == 4);
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * 4));
    }
    if (!out) {
        throw std::runtime_error("write failed on " + path);
    }
}

std::pair<std::uint32_t, EmbeddingTable> read_embeddings(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open embeddings file " + path);
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string_view(magic, 4) != "AEMB") {
        throw std::runtime_error(path + ": bad magic, not an AEMB file");
    }
    const std::uint32_t dim = read_u32le(in);
    EmbeddingTable table;
    while (true) {
        const std::uint16_t id_len = read_u16le(in);
        if (in.eof()) {
            break;
        }
        std::string id(id_len, '\0');
        in.read(id.data(), id_len);
        std::vector<float> values(dim);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(dim) * 4);
        if (!in) {
            throw std::runtime_error(path + ": truncated record for id " + id);
        }
        table.emplace(std::move(id), std::move(values));
    }
    return {dim, std::move(table)};
}

LoadedCorpus load_corpus(const CorpusPaths& paths)
{
    auto rows = read_labels_csv(paths.labels_csv);
    if (rows.empty()) {
        throw std::runtime_error(paths.labels_csv + ": empty corpus");
    }
    auto [dim, table] = read_embeddings(paths.embeddings_bin);
    for (auto& row : rows) {
        auto it = table.find(row.sample.id);
        if (it == table.end()) {
            throw std::runtime_error("no embedding for sample id " +
                                     row.sample.id);
        }
        row.sample.embedding = it->second;
    }

    std::vector<LabelRow*> task_rows;
    std::vector<LabelRow*> background_rows;
    LoadedCorpus loaded;
    for (auto& row : rows) {
        if (row.cls == "task") {
            task_rows.push_back(&row);
        } else if (row.cls == "background") {
            background_rows.push_back(&row);
        }
    }
    if (task_rows.empty() || background_rows.empty()) {
        throw std::runtime_error(paths.labels_csv +
                                 ": corpus needs both task and background "
                                 "labeled samples");
    }

    loaded.corpus.task = build_group(task_rows, ClassTag::task);
    loaded.corpus.background = build_group(background_rows, ClassTag::background);

    std::int64_t task_seeds = 0;
    std::int64_t background_seeds = 0;
    for (const auto& s : loaded.corpus.task.samples) {
        task_seeds += s.seed_label.has_value();
    }
    for (const auto& s : loaded.corpus.background.samples) {
        background_seeds += s.seed_label.has_value();
    }
    loaded.corpus.seed_count = std::min(task_seeds, background_seeds);

    Date latest{-9999, 1, 1};
    for (const auto& group :
         {&loaded.corpus.task, &loaded.corpus.background}) {
        for (const auto& s : group->samples) {
            latest = std::max(latest, s.capture_date);
        }
    }
    loaded.corpus.date_ref = latest;

    for (auto& row : rows) {
        if (row.cls == "unlabeled") {
            loaded.unlabeled.push_back(std::move(row.sample));
        }
    }
    std::sort(loaded.unlabeled.begin(), loaded.unlabeled.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });

    if (!paths.state_jsonl.empty()) {
        load_state(loaded.corpus, paths.state_jsonl);
    }
    return loaded;
}

void save_state(const WeightedCorpus& corpus, const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write state file " + path);
    }
    auto emit = [&out](const HistoryGroup& group) {
        for (std::size_t i = 0; i < group.size(); ++i) {
            json record = {{"id", group.samples[i].id},
                           {"alpha", group.alpha[i]},
                           {"conf", group.conf[i]}};
            out << record.dump() << '\n';
        }
    };
    emit(corpus.task);
    emit(corpus.background);
    if (!out) {
        throw std::runtime_error("write failed on " + path);
    }
}

void load_state(WeightedCorpus& corpus, const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open state file " + path);
    }
    std::unordered_map<std::string, std::pair<std::int64_t, double>> state;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        json record;
        try {
            record = json::parse(line);
            state[record.at("id").get<std::string>()] = {
                record.at("alpha").get<std::int64_t>(),
                record.at("conf").get<double>()};
        } catch (const json::exception& e) {
            throw ParseError(path, lineno, e.what());
        }
    }
    auto apply = [&state, &path](HistoryGroup& group) {
        for (std::size_t i = 0; i < group.size(); ++i) {
            auto it = state.find(group.samples[i].id);
            if (it == state.end()) {
                throw std::runtime_error(path + ": no state for sample id " +
                                         group.samples[i].id);
            }
            group.alpha[i] = it->second.first;
            group.conf[i] = it->second.second;
        }
        group.check_aligned();
    };
    apply(corpus.task);
    apply(corpus.background);
}

void save_corpus(const LoadedCorpus& loaded, const CorpusPaths& paths)
{
    std::ofstream out(paths.labels_csv);
    if (!out) {
        throw std::runtime_error("cannot write labels file " +
                                 paths.labels_csv);
    }
    out << "id,location_id,tile_x,tile_y,zoom,date,class\n";
    std::vector<std::pair<std::string, std::vector<float>>> records;
    auto emit = [&out, &records](const std::vector<Sample>& samples,
                                 const std::string& cls) {
        for (const auto& s : samples) {
            out << s.id << ',' << s.location_id << ',' << s.tile.x << ','
                << s.tile.y << ',' << s.tile.zoom << ','
                << s.capture_date.to_string() << ',' << cls << '\n';
            records.emplace_back(s.id, s.embedding);
        }
    };
    emit(loaded.corpus.task.samples, "task");
    emit(loaded.corpus.background.samples, "background");
    emit(loaded.unlabeled, "unlabeled");
    if (!out) {
        throw std::runtime_error("write failed on " + paths.labels_csv);
    }

    const std::uint32_t dim =
        records.empty() ? 0 : static_cast<std::uint32_t>(records[0].second.size());
    write_embeddings(paths.embeddings_bin, dim, records);
    if (!paths.state_jsonl.empty()) {
        save_state(loaded.corpus, paths.state_jsonl);
    }
}

} // namespace archboot
