#include "aif/hierarchy.hpp"

#include <algorithm>
#include <set>

#include "aif/csv.hpp"
#include "aif/errors.hpp"

namespace aif {

Polarity parse_polarity(const std::string& s) {
  if (s == "positive") return Polarity::kPositive;
  if (s == "negative") return Polarity::kNegative;
  if (s == "two_way") return Polarity::kTwoWay;
  throw SchemaError("unknown polarity '" + s +
                    "' (expected positive, negative or two_way)");
}

std::string to_string(Polarity p) {
  switch (p) {
    case Polarity::kPositive: return "positive";
    case Polarity::kNegative: return "negative";
    case Polarity::kTwoWay: return "two_way";
  }
  return "positive";
}

std::string to_string(Provenance p) {
  return p == Provenance::kSeed ? "seed" : "expanded";
}

std::vector<std::string> IndicatorHierarchy::entry_names() const {
  std::vector<std::string> names;
  for (const auto& primary : primaries) {
    for (const auto& secondary : primary.secondaries) {
      for (const auto& entry : secondary.entries) names.push_back(entry.name);
    }
  }
  return names;
}

const IndicatorEntry* IndicatorHierarchy::find_entry(const std::string& name) const {
  for (const auto& primary : primaries) {
    for (const auto& secondary : primary.secondaries) {
      for (const auto& entry : secondary.entries) {
        if (entry.name == name) return &entry;
      }
    }
  }
  return nullptr;
}

void IndicatorHierarchy::validate() const {
  std::set<std::string> seen;
  for (const auto& primary : primaries) {
    if (primary.secondaries.empty()) {
      throw SchemaError("primary indicator '" + primary.name + "' has no secondaries");
    }
    for (const auto& secondary : primary.secondaries) {
      if (secondary.entries.empty()) {
        throw SchemaError("secondary indicator '" + secondary.name + "' has no entries");
      }
      for (const auto& entry : secondary.entries) {
        if (entry.name.empty()) throw SchemaError("empty indicator entry name");
        if (!seen.insert(entry.name).second) {
          throw SchemaError("duplicate indicator entry '" + entry.name + "'");
        }
      }
    }
  }
}

IndicatorHierarchy load_hierarchy_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t c_primary = table.column("primary");
  const std::size_t c_secondary = table.column("secondary");
  const std::size_t c_entry = table.column("entry");
  const std::size_t c_polarity = table.column("polarity");
  const bool has_provenance =
      std::find(table.header.begin(), table.header.end(), "provenance") !=
      table.header.end();
  const std::size_t c_provenance = has_provenance ? table.column("provenance") : 0;
  const std::size_t c_score = has_provenance ? table.column("score") : 0;

  IndicatorHierarchy hierarchy;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto context = path.string() + " row " + std::to_string(r + 2);
    if (row[c_primary].empty() || row[c_secondary].empty() || row[c_entry].empty()) {
      throw SchemaError(context + ": empty primary/secondary/entry");
    }

    IndicatorEntry entry;
    entry.name = row[c_entry];
    try {
      entry.polarity = parse_polarity(row[c_polarity]);
    } catch (const SchemaError& e) {
      throw SchemaError(context + ": " + e.what());
    }
    if (has_provenance) {
      const auto& prov = row[c_provenance];
      if (prov == "seed") {
        entry.provenance = Provenance::kSeed;
      } else if (prov == "expanded") {
        entry.provenance = Provenance::kExpanded;
      } else {
        throw SchemaError(context + ": unknown provenance '" + prov + "'");
      }
      entry.score = parse_double_field(row[c_score], context);
    }

    if (hierarchy.primaries.empty() || hierarchy.primaries.back().name != row[c_primary]) {
      hierarchy.primaries.push_back({row[c_primary], {}});
    }
    auto& primary = hierarchy.primaries.back();
    if (primary.secondaries.empty() || primary.secondaries.back().name != row[c_secondary]) {
      primary.secondaries.push_back({row[c_secondary], {}});
    }
    primary.secondaries.back().entries.push_back(std::move(entry));
  }

  // Non-contiguous groups would have produced duplicate names.
  std::set<std::string> primaries_seen, secondaries_seen;
  for (const auto& primary : hierarchy.primaries) {
    if (!primaries_seen.insert(primary.name).second) {
      throw SchemaError(path.string() + ": primary '" + primary.name +
                        "' appears in non-contiguous rows");
    }
    for (const auto& secondary : primary.secondaries) {
      if (!secondaries_seen.insert(secondary.name).second) {
        throw SchemaError(path.string() + ": secondary '" + secondary.name +
                          "' appears in non-contiguous rows");
      }
    }
  }
  hierarchy.validate();
  return hierarchy;
}

void save_hierarchy_csv(const std::filesystem::path& path,
                        const IndicatorHierarchy& hierarchy) {
  CsvTable table;
  table.header = {"primary", "secondary", "entry", "polarity", "provenance", "score"};
  for (const auto& primary : hierarchy.primaries) {
    for (const auto& secondary : primary.secondaries) {
      for (const auto& entry : secondary.entries) {
        table.rows.push_back({primary.name, secondary.name, entry.name,
                              to_string(entry.polarity), to_string(entry.provenance),
                              format_double(entry.score)});
      }
    }
  }
  write_csv_atomic(path, table);
}

}  // namespace aif
