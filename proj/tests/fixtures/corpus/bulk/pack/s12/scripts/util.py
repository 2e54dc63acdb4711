def tidy(entries):
    return sorted(entries)  # outline
