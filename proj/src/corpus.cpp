#include "crosscast/corpus.hpp"

#include <algorithm>
#include <set>

#include "crosscast/csv.hpp"

namespace crosscast {

namespace fs = std::filesystem;

std::string StreamKey::label() const {
    std::string s = source + ":" + disease + ":";
    s += subtype.empty() ? "-" : subtype;
    s += ":" + location;
    return s;
}

Transmission parse_transmission(const std::string& text) {
    if (text == "respiratory") return Transmission::respiratory;
    if (text == "sexual") return Transmission::sexual;
    if (text == "fecal-oral") return Transmission::fecal_oral;
    if (text == "vector-borne") return Transmission::vector_borne;
    throw SchemaError("unknown mode of transmission '" + text + "'");
}

std::string to_string(Transmission t) {
    switch (t) {
        case Transmission::respiratory: return "respiratory";
        case Transmission::sexual: return "sexual";
        case Transmission::fecal_oral: return "fecal-oral";
        case Transmission::vector_borne: return "vector-borne";
    }
    return {};
}

Unit parse_unit(const std::string& text) {
    if (text == "cases") return Unit::cases;
    if (text == "deaths") return Unit::deaths;
    if (text == "hospitalizations") return Unit::hospitalizations;
    if (text == "proportion") return Unit::proportion;
    throw SchemaError("unknown unit '" + text + "'");
}

std::string to_string(Unit u) {
    switch (u) {
        case Unit::cases: return "cases";
        case Unit::deaths: return "deaths";
        case Unit::hospitalizations: return "hospitalizations";
        case Unit::proportion: return "proportion";
    }
    return {};
}

ScopeKind parse_scope(const std::string& text) {
    if (text == "single_stream") return ScopeKind::single_stream;
    if (text == "single_disease") return ScopeKind::single_disease;
    if (text == "mode_of_transmission") return ScopeKind::mode_of_transmission;
    if (text == "all_data") return ScopeKind::all_data;
    throw SchemaError("unknown training scope '" + text + "'");
}

std::string to_string(ScopeKind k) {
    switch (k) {
        case ScopeKind::single_stream: return "single_stream";
        case ScopeKind::single_disease: return "single_disease";
        case ScopeKind::mode_of_transmission: return "mode_of_transmission";
        case ScopeKind::all_data: return "all_data";
    }
    return {};
}

TrainingScope TrainingScope::make(ScopeKind kind, std::uint64_t seed) {
    TrainingScope s;
    s.kind = kind;
    s.subsample_fraction = (kind == ScopeKind::all_data) ? 0.5 : 1.0;
    s.rng_seed = seed;
    return s;
}

Transmission Taxonomy::mode(const std::string& disease) const {
    auto it = mode_of.find(disease);
    if (it == mode_of.end())
        throw MissingTaxonomyEntry("disease '" + disease + "' has no taxonomy entry");
    return it->second;
}

std::string Taxonomy::canonical_source(const std::string& source) const {
    auto it = source_alias.find(source);
    return it == source_alias.end() ? source : it->second;
}

bool ObservationSeries::gap_free(int first, int last) const {
    if (first < 0 || last >= size() || first > last)
        return false;
    for (int i = first; i <= last; ++i)
        if (is_missing(values[i]))
            return false;
    return true;
}

int ObservationSeries::observed_before(int i) const {
    int n = 0;
    int hi = std::min(i, size());
    for (int j = 0; j < hi; ++j)
        if (!is_missing(values[j]))
            ++n;
    return n;
}

const ObservationSeries* Corpus::find(const StreamKey& key) const {
    for (const auto& s : series)
        if (s.key == key)
            return &s;
    return nullptr;
}

namespace {

constexpr const char* kStreamHeader = "source,disease,subtype,location,unit,week_start,value";
constexpr const char* kTaxonomyHeader = "disease,mode_of_transmission,aliases";

Taxonomy load_taxonomy(const fs::path& path) {
    auto rows = csv::read_file(path.string());
    if (rows.empty() || rows[0] != csv::split_line(kTaxonomyHeader))
        throw SchemaError("taxonomy file " + path.string() + " must start with header '" +
                          kTaxonomyHeader + "'");
    Taxonomy tax;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 3)
            throw SchemaError("taxonomy row " + std::to_string(r + 1) + " has " +
                              std::to_string(row.size()) + " fields, expected 3");
        const std::string& disease = row[0];
        if (disease.empty())
            throw SchemaError("empty disease name in taxonomy row " + std::to_string(r + 1));
        if (tax.mode_of.count(disease))
            throw SchemaError("duplicate taxonomy row for disease '" + disease + "'");
        tax.mode_of[disease] = parse_transmission(row[1]);
        // aliases column: semicolon-separated "alias=canonical" source pairs
        std::string field = row[2];
        std::size_t start = 0;
        while (start < field.size()) {
            std::size_t end = field.find(';', start);
            if (end == std::string::npos)
                end = field.size();
            std::string entry = field.substr(start, end - start);
            start = end + 1;
            if (entry.empty())
                continue;
            std::size_t eq = entry.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size())
                throw SchemaError("bad alias entry '" + entry + "' in taxonomy row " +
                                  std::to_string(r + 1) + " (expected alias=canonical)");
            std::string alias = entry.substr(0, eq);
            std::string canonical = entry.substr(eq + 1);
            auto it = tax.source_alias.find(alias);
            if (it != tax.source_alias.end() && it->second != canonical)
                throw SchemaError("conflicting alias '" + alias + "' in taxonomy");
            tax.source_alias[alias] = canonical;
        }
    }
    return tax;
}

struct RawRow {
    StreamKey key;
    Unit unit;
    DayNumber day;
    double value;
    std::string context;  // file:line for error messages
};

void load_stream_file(const fs::path& path, const Taxonomy& tax, std::vector<RawRow>& out) {
    auto rows = csv::read_file(path.string());
    if (rows.empty() || rows[0] != csv::split_line(kStreamHeader))
        throw SchemaError("stream file " + path.string() + " must start with header '" +
                          kStreamHeader + "'");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        std::string context = path.filename().string() + ":" + std::to_string(r + 1);
        if (row.size() != 7)
            throw SchemaError("row " + context + " has " + std::to_string(row.size()) +
                              " fields, expected 7");
        RawRow raw;
        raw.key.source = tax.canonical_source(row[0]);
        raw.key.disease = row[1];
        raw.key.subtype = row[2];
        raw.key.location = row[3];
        if (raw.key.source.empty() || raw.key.disease.empty() || raw.key.location.empty())
            throw SchemaError("empty identifier in row " + context);
        raw.unit = parse_unit(row[4]);
        raw.day = parse_iso_date(row[5]);
        raw.value = csv::parse_value(row[6], context);
        if (!is_missing(raw.value) && raw.value < 0)
            throw SchemaError("negative value " + row[6] + " in row " + context);
        raw.context = std::move(context);
        out.push_back(std::move(raw));
    }
}

}  // namespace

Corpus load_corpus(const fs::path& root) {
    if (!fs::is_directory(root))
        throw SchemaError("corpus root " + root.string() + " is not a directory");
    fs::path tax_path = root / "taxonomy.csv";
    if (!fs::exists(tax_path))
        throw SchemaError("missing taxonomy.csv under " + root.string());

    Corpus corpus;
    corpus.taxonomy = load_taxonomy(tax_path);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv")
            continue;
        if (entry.path().filename() == "taxonomy.csv")
            continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<RawRow> raw;
    for (const auto& f : files)
        load_stream_file(f, corpus.taxonomy, raw);

    // Group rows by key, preserving file order within each key.
    std::map<StreamKey, std::vector<const RawRow*>> by_key;
    for (const auto& r : raw)
        by_key[r.key].push_back(&r);

    for (auto& [key, rows] : by_key) {
        if (!corpus.taxonomy.has_disease(key.disease))
            throw MissingTaxonomyEntry("disease '" + key.disease +
                                       "' (stream " + key.label() + ") has no taxonomy entry");
        ObservationSeries series;
        series.key = key;
        series.unit = rows.front()->unit;
        DayNumber first_day = rows.front()->day;
        series.start_week = week_of_day(first_day);
        series.weekday_offset = static_cast<int>(first_day - 7 * series.start_week);

        DayNumber prev_day = first_day - 7;
        for (const RawRow* r : rows) {
            if (r->unit != series.unit)
                throw SchemaError("unit changes mid-series in row " + r->context);
            if (r->day <= prev_day)
                throw NonMonotoneDates("dates not strictly increasing at row " + r->context);
            DayNumber step = r->day - prev_day;
            if (step % 7 != 0)
                throw SchemaError("week_start not on the series' weekly grid at row " +
                                  r->context);
            for (DayNumber skip = 7; skip < step; skip += 7)
                series.values.push_back(kMissing);  // explicit gap marker
            series.values.push_back(r->value);
            prev_day = r->day;
        }
        corpus.series.push_back(std::move(series));
    }
    return corpus;
}

void write_corpus(const Corpus& corpus, const fs::path& root) {
    fs::create_directories(root);
    {
        std::ofstream out(root / "taxonomy.csv");
        out << kTaxonomyHeader << "\n";
        // Alias pairs ride on the first row; they are corpus-wide anyway.
        bool first = true;
        for (const auto& [disease, mode] : corpus.taxonomy.mode_of) {
            out << disease << "," << to_string(mode) << ",";
            if (first) {
                bool sep = false;
                for (const auto& [alias, canon] : corpus.taxonomy.source_alias) {
                    if (sep)
                        out << ";";
                    out << alias << "=" << canon;
                    sep = true;
                }
                first = false;
            }
            out << "\n";
        }
    }

    auto sanitize = [](std::string s) {
        for (char& c : s)
            if (!std::isalnum(static_cast<unsigned char>(c)))
                c = '_';
        return s;
    };

    // One file per stream; locations share the file.
    std::map<std::string, std::ofstream> open_files;
    for (const auto& series : corpus.series) {
        std::string name = sanitize(series.key.source) + "__" + sanitize(series.key.disease);
        if (!series.key.subtype.empty())
            name += "__" + sanitize(series.key.subtype);
        name += ".csv";
        auto [it, inserted] = open_files.try_emplace(name);
        if (inserted) {
            it->second.open(root / name);
            it->second << kStreamHeader << "\n";
        }
        auto& out = it->second;
        for (int i = 0; i < series.size(); ++i) {
            if (is_missing(series.values[i]))
                continue;  // gaps are implied by the date sequence
            out << series.key.source << "," << series.key.disease << ","
                << series.key.subtype << "," << series.key.location << ","
                << to_string(series.unit) << "," << format_iso_date(series.day_of(i)) << ","
                << csv::format_value(series.values[i]) << "\n";
        }
    }
}

std::vector<const ObservationSeries*> select_training_set(const Corpus& corpus,
                                                          const StreamKey& target,
                                                          const TrainingScope& scope) {
    const ObservationSeries* target_series = corpus.find(target);
    if (!target_series)
        throw UnknownTarget("target " + target.label() + " not in corpus");

    Transmission target_mode = corpus.taxonomy.mode(target.disease);

    std::vector<const ObservationSeries*> out;
    for (const auto& s : corpus.series) {
        bool keep = false;
        switch (scope.kind) {
            case ScopeKind::single_stream:
                keep = s.key.same_stream(target);
                break;
            case ScopeKind::single_disease:
                keep = s.key.disease == target.disease;
                break;
            case ScopeKind::mode_of_transmission:
                keep = corpus.taxonomy.mode(s.key.disease) == target_mode;
                break;
            case ScopeKind::all_data:
                keep = true;
                break;
        }
        if (keep)
            out.push_back(&s);
    }
    return out;
}

bool keep_training_row(const TrainingScope& scope, const StreamKey& key, int end_index) {
    if (scope.subsample_fraction >= 1.0)
        return true;
    std::uint64_t h = hash_combine(scope.rng_seed, hash_string(key.label()));
    h = hash_combine(h, static_cast<std::uint64_t>(end_index));
    return hash_to_unit(h) < scope.subsample_fraction;
}

}  // namespace crosscast
