#include "opsrag/synthetic.hpp"

#include <array>
#include <set>

#include "opsrag/document.hpp"
#include "opsrag/error.hpp"
#include "opsrag/random.hpp"

namespace opsrag {
namespace {

struct Topic {
  const char* system;
  std::array<const char*, 8> terms;
  std::array<const char*, 4> symptoms;
};

const std::array<Topic, 20> kTopics = {{
    {"kafka", {"partition count", "replication factor", "retention hours", "consumer group", "segment size", "leader election", "fetch size", "compaction"},
     {"consumer lag spikes", "under-replicated partitions", "offset commit failures", "broker disk saturation"}},
    {"postgres", {"shared buffers", "work memory", "checkpoint interval", "wal level", "vacuum threshold", "max connections", "replica slot", "autovacuum"},
     {"replication slot bloat", "connection exhaustion", "long running vacuum", "checkpoint storms"}},
    {"nginx", {"worker processes", "keepalive timeout", "upstream pool", "buffer size", "rate limit zone", "tls ciphers", "access log", "gzip level"},
     {"502 bad gateway", "upstream timeouts", "worker crashes", "certificate expiry"}},
    {"kubernetes", {"pod replicas", "resource quota", "liveness probe", "node selector", "rolling update", "horizontal autoscaler", "config map", "service mesh"},
     {"crash loop backoff", "pending pods", "image pull errors", "node pressure evictions"}},
    {"redis", {"maxmemory policy", "eviction sampling", "append only file", "snapshot schedule", "cluster slots", "sentinel quorum", "client buffer", "lazy freeing"},
     {"memory fragmentation", "replica desync", "blocked clients", "latency spikes"}},
    {"elasticsearch", {"shard count", "refresh interval", "heap size", "index template", "merge policy", "translog durability", "query cache", "field mapping"},
     {"red cluster health", "circuit breaker trips", "unassigned shards", "slow queries"}},
    {"rabbitmq", {"queue mirroring", "prefetch count", "dead letter exchange", "vhost limits", "memory watermark", "federation link", "message ttl", "lazy queues"},
     {"queue backlog growth", "connection blocking", "partition splits", "unacked message buildup"}},
    {"haproxy", {"backend servers", "health check interval", "stick table", "connection limit", "timeout server", "balance algorithm", "ssl offload", "acl rules"},
     {"backend flapping", "session drops", "frontend saturation", "health check failures"}},
    {"mysql", {"innodb buffer pool", "binlog format", "query cache", "thread pool", "slow query log", "gtid mode", "redo log size", "table open cache"},
     {"replication lag", "deadlock storms", "table lock waits", "binlog disk usage"}},
    {"cassandra", {"compaction strategy", "consistency level", "hinted handoff", "memtable size", "repair schedule", "gc grace", "token ranges", "read repair"},
     {"tombstone warnings", "hint backlog", "gc pauses", "read timeouts"}},
    {"zookeeper", {"tick time", "init limit", "sync limit", "snapshot count", "ensemble size", "session timeout", "four letter words", "data directory"},
     {"leader churn", "session expirations", "snapshot corruption", "quorum loss"}},
    {"prometheus", {"scrape interval", "retention period", "recording rules", "alert rules", "remote write", "relabel configs", "tsdb blocks", "service discovery"},
     {"scrape failures", "high cardinality", "wal replay delays", "alert flapping"}},
    {"jenkins", {"executor count", "pipeline library", "agent labels", "build retention", "credential store", "plugin versions", "workspace cleanup", "queue throttling"},
     {"stuck build queue", "agent disconnects", "plugin conflicts", "workspace disk full"}},
    {"vault", {"seal type", "lease duration", "auth method", "secret engine", "audit device", "policy paths", "token ttl", "raft storage"},
     {"sealed nodes", "lease revocation backlog", "token renewal errors", "audit log blocking"}},
    {"ceph", {"placement groups", "crush map", "osd weight", "pool size", "scrub schedule", "monitor quorum", "bluestore cache", "recovery priority"},
     {"slow ops", "degraded objects", "osd flapping", "near full ratio"}},
    {"dns", {"zone transfer", "ttl values", "forwarder list", "recursion policy", "cache size", "dnssec keys", "split horizon", "query logging"},
     {"resolution timeouts", "servfail bursts", "stale records", "cache poisoning alerts"}},
    {"ldap", {"bind account", "search base", "replication agreement", "index attributes", "password policy", "schema extensions", "tls mode", "size limit"},
     {"bind failures", "replication conflicts", "slow searches", "account lockouts"}},
    {"spark", {"executor memory", "shuffle partitions", "dynamic allocation", "broadcast threshold", "checkpoint directory", "speculation", "driver cores", "serializer"},
     {"executor lost", "shuffle fetch failures", "driver out of memory", "skewed stages"}},
    {"etcd", {"heartbeat interval", "election timeout", "snapshot count", "quota backend", "compaction retention", "peer tls", "defrag schedule", "member list"},
     {"database space exceeded", "leader changes", "slow fsync", "member unreachable"}},
    {"minio", {"erasure set", "bucket policy", "lifecycle rules", "versioning", "replication target", "drive layout", "quota limits", "kms key"},
     {"drive offline", "healing backlog", "replication failures", "slow uploads"}},
}};

const std::array<const char*, 20> kSyllables = {"ka", "vel", "mor", "tri", "sen", "dal", "qui", "zor", "fen", "lum",
                                                "rah", "bex", "nov", "tal", "gri", "pho", "sul", "wen", "yar", "dro"};

const std::array<const char*, 24> kServiceWords = {"orion", "atlas", "cobalt", "delta", "ember", "falcon", "granite", "harbor",
                                                   "iris", "juniper", "keystone", "lumen", "meridian", "nimbus", "onyx", "pioneer",
                                                   "quartz", "raven", "summit", "tundra", "umbra", "vertex", "willow", "zephyr"};

const std::array<const char*, 4> kRemedies = {
    "drain-node; rolling-restart workers",
    "rollback last-deploy; watch error-rate 10m",
    "scale-out +2; flush stuck-queue",
    "isolate noisy-client; restart --debug-log",
};
const std::array<const char*, 3> kEscalations = {
    "failover standby; page oncall-lead",
    "open P1 ticket; attach logs 1h",
    "after 30m escalate platform-team",
};

const std::array<const char*, 6> kKaTrain = {
    "How is {nick} configured on {system}?",
    "What {term} settings does {nick} use?",
    "Describe the {system} setup behind {nick}.",
    "Which parameters were chosen for {nick}?",
    "Where is the {term} of {nick} defined?",
    "What are the configuration defaults of {nick}?",
};
const std::array<const char*, 2> kKaEval = {
    "Tell me about the {term} configuration for {nick}.",
    "Which {system} options does {nick} run with?",
};
const std::array<const char*, 6> kTsTrain = {
    "Runbook {nick}: the service shows {symptom}, what should I do?",
    "Following runbook {nick}, how do I recover from {symptom}?",
    "Troubleshoot {symptom} with the {nick} runbook.",
    "What causes {symptom} in the {nick} runbook and how is it fixed?",
    "The {nick} runbook covers {symptom}. Any remedy?",
    "Steps in runbook {nick} to resolve {symptom}?",
};
const std::array<const char*, 2> kTsEval = {
    "What is the fix in runbook {nick} for {symptom}?",
    "Our {system} alert points to runbook {nick} with {symptom}; how do we repair it?",
};

std::string fill(std::string_view tmpl, const std::string& nick, const std::string& system, const std::string& term,
                 const std::string& symptom) {
  std::string out(tmpl);
  auto sub = [&out](std::string_view key, const std::string& value) {
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size())) {
      out.replace(pos, key.size(), value);
    }
  };
  sub("{nick}", nick);
  sub("{system}", system);
  sub("{term}", term);
  sub("{symptom}", symptom);
  return out;
}

struct DocPlan {
  SyntheticDocument doc;
  std::vector<std::string> terms;  // picked topic terms
  std::string symptom;
  std::string ka_answer;
  std::string ts_answer;
};

DocPlan plan_document(std::size_t index, std::size_t topic, Rng& rng, std::set<std::string>& used_names,
                      std::set<std::string>& used_nicks) {
  const Topic& t = kTopics[topic % kTopics.size()];
  DocPlan p;
  char id[32];
  std::snprintf(id, sizeof(id), "svc-%03zu", index);
  p.doc.id = id;
  p.doc.topic = topic;

  do {
    p.doc.service = std::string(t.system) + "-" + kServiceWords[rng.below(kServiceWords.size())] + "-" +
                    std::to_string(10 + rng.below(90));
  } while (!used_names.insert(p.doc.service).second);
  auto fresh_name = [&] {
    std::string name;
    do {
      name.clear();
      for (int s = 0; s < 3; ++s) name += kSyllables[rng.below(kSyllables.size())];
      name[0] = static_cast<char>(name[0] - 'a' + 'A');
    } while (!used_nicks.insert(name).second);
    return name;
  };
  p.doc.nickname = fresh_name();
  p.doc.runbook = fresh_name();

  std::vector<std::string> terms(t.terms.begin(), t.terms.end());
  rng.shuffle(terms);
  terms.resize(4);
  p.terms = terms;
  p.symptom = t.symptoms[rng.below(t.symptoms.size())];

  const auto& svc = p.doc.service;
  const std::string sys = t.system;
  auto num = [&rng](std::uint64_t lo, std::uint64_t hi) { return std::to_string(lo + rng.below(hi - lo + 1)); };

  p.ka_answer = "The " + svc + " service runs on " + sys + " with " + terms[0] + " set to " + num(2, 64) + ".";
  std::string ka = p.ka_answer + " Its " + terms[1] + " is tuned to " + num(10, 900) + " for steady throughput.\n" +
                   "Operators keep " + terms[2] + " at " + num(1, 48) + " and review " + terms[3] +
                   " during each release window.\n" + "Changes to " + svc + " require a ticket and a peer review.";

  p.ts_answer = "ALERT " + svc + " :: " + p.symptom + "\nTRIAGE " + sys + " dashboards; alert timeline";
  std::string ts = p.ts_answer + "\nREMEDY " + kRemedies[rng.below(kRemedies.size())] + "\nESCALATE " +
                   kEscalations[rng.below(kEscalations.size())] + "\nRECORD " + svc + " first-alert-time";

  p.doc.markdown = "# " + svc + " configuration\n\n" + ka + "\n\n# " + svc + " incident handling\n\n" + ts + "\n";
  return p;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& config, const Tokenizer& tok,
                                      const ChunkerConfig& chunking) {
  if (config.topics == 0 || config.topics > kTopics.size()) {
    throw Error(Errc::kInvalidArgument, "topics must be in 1.." + std::to_string(kTopics.size()));
  }
  if (config.train_phrasings > kKaTrain.size() || config.eval_phrasings > kKaEval.size()) {
    throw Error(Errc::kInvalidArgument, "too many phrasings requested");
  }
  Rng rng(config.seed);
  std::set<std::string> used_names, used_nicks;
  SyntheticCorpus corpus;

  for (std::size_t i = 0; i < config.documents; ++i) {
    auto plan = plan_document(i, i % config.topics, rng, used_names, used_nicks);
    const Topic& t = kTopics[plan.doc.topic];

    auto chunks = chunk_targeted(clean_text(parse_document(plan.doc.markdown, plan.doc.id)), tok, chunking);
    std::string ka_id, ts_id;
    for (const auto& c : chunks) {
      if (c.title_path.empty()) continue;
      if (c.title_path.front() == plan.doc.service + " configuration") ka_id = c.id;
      if (c.title_path.front() == plan.doc.service + " incident handling") ts_id = c.id;
    }
    if (ka_id.empty() || ts_id.empty()) {
      throw Error(Errc::kInvalidArgument, "chunking merged the sections of " + plan.doc.id);
    }

    const auto& nick = plan.doc.nickname;
    const auto& runbook = plan.doc.runbook;
    for (std::size_t j = 0; j < config.train_phrasings; ++j) {
      const auto& term = plan.terms[j % plan.terms.size()];
      corpus.qak_log.push_back({fill(kKaTrain[j], nick, t.system, term, plan.symptom), plan.ka_answer,
                                QaTask::kQakLog, {ka_id}});
      corpus.qat_log.push_back({fill(kTsTrain[j], runbook, t.system, term, plan.symptom), plan.ts_answer,
                                QaTask::kQatLog, {ts_id}});
    }
    for (std::size_t j = 0; j < config.eval_phrasings; ++j) {
      const auto& term = plan.terms[(j + 1) % plan.terms.size()];
      corpus.eval.push_back({fill(kKaEval[j], nick, t.system, term, plan.symptom), QaMode::kKnowledgeAcquisition,
                             {ka_id}, plan.ka_answer});
      corpus.eval.push_back({fill(kTsEval[j], runbook, t.system, term, plan.symptom), QaMode::kTroubleshooting,
                             {ts_id}, plan.ts_answer});
    }
    for (auto& c : chunks) corpus.chunks.push_back(std::move(c));
    corpus.documents.push_back(std::move(plan.doc));
  }
  return corpus;
}

}  // namespace opsrag
