import os
import json
import csv

from src.core.log_handling import log_path

LOG_FILE = log_path("file_handling.log")
LOG_TZ = "UTC"

# Initialize logger with lazy loading to avoid circular imports
LOGGER = None

def get_logger():
    global LOGGER
    if LOGGER is None:
        from src.core.log_handling import LogHandling
        LOGGER = LogHandling(LOG_FILE, LOG_TZ)
    return LOGGER


def format_float(value):
    """Shortest round-tripping text for a float, so repeated runs write identical bytes"""
    return repr(float(value))


class FileHandling:
    def __init__(self, filename):
        """
        Initialize file handling

        Args:
            filename: Path to the file
        """
        self.filename = filename
        self._error_count = 0

        self.ensure_directory_exists()


    def ensure_directory_exists(self):
        """Ensure the directory for the file exists"""
        try:
            directory = os.path.dirname(self.filename)
            if directory and not os.path.exists(directory):
                os.makedirs(directory, exist_ok=True)
                get_logger().writeLog(f"Created directory: {directory}")
        except Exception as e:
            get_logger().writeLog(f"Error creating directory for {self.filename}: {e}")


    def read_json(self):
        """
        Read JSON content from file

        Returns:
            Parsed JSON data or None if the file is missing or unreadable
        """
        try:
            if not os.path.exists(self.filename):
                return None

            with open(self.filename, 'r', encoding='utf-8') as file:
                return json.load(file)
        except Exception as e:
            get_logger().writeLog(f"Error reading JSON from {self.filename}: {e}")
            return None


    def write_json(self, data, indent=2):
        """
        Write JSON data to file with sorted keys (stable bytes for provenance)

        Returns:
            Boolean indicating success
        """
        try:
            with open(self.filename, 'w', encoding='utf-8') as file:
                json.dump(data, file, indent=indent, sort_keys=True, ensure_ascii=False)
                file.write('\n')
            return True
        except Exception as e:
            get_logger().writeLog(f"Error writing JSON to {self.filename}: {e}")
            return False


    def write_csv(self, rows, fieldnames, comments=None):
        """
        Write a complete CSV file (overwrites), preceded by '# key: value' comment lines

        Args:
            rows: Iterable of sequences, one per data row; floats are written with format_float
            fieldnames: Header row
            comments: Optional dict of provenance entries written as comment lines

        Returns:
            Boolean indicating success
        """
        try:
            with open(self.filename, 'w', newline='', encoding='utf-8') as file:
                for key, value in (comments or {}).items():
                    file.write(f"# {key}: {value}\n")
                writer = csv.writer(file, lineterminator='\n')
                writer.writerow(fieldnames)
                for row in rows:
                    writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
            get_logger().writeDebugLog(f"Wrote CSV {self.filename} ({len(fieldnames)} columns)")
            return True
        except Exception as e:
            get_logger().writeLog(f"Error writing CSV {self.filename}: {e}")
            self._error_count += 1
            return False


    def read_csv(self):
        """
        Read a CSV written by write_csv

        Returns:
            (comments dict, header list, list of row lists) or None if error
        """
        try:
            comments = {}
            with open(self.filename, 'r', newline='', encoding='utf-8') as file:
                lines = file.read().splitlines()
            data_lines = []
            for line in lines:
                if line.startswith('# '):
                    key, _, value = line[2:].partition(': ')
                    comments[key] = value
                else:
                    data_lines.append(line)
            parsed = list(csv.reader(data_lines))
            if not parsed:
                return comments, [], []
            return comments, parsed[0], parsed[1:]
        except Exception as e:
            get_logger().writeLog(f"Error reading CSV {self.filename}: {e}")
            return None
