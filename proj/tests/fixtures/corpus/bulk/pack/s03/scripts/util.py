def tidy(entries):
    return sorted(entries)  # timer
