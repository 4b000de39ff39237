import importlib.util

# the plots frontend is a separate package; skip its tests when absent
collect_ignore_glob = []
if importlib.util.find_spec("uraplots") is None:
    collect_ignore_glob.append("plots/*")
